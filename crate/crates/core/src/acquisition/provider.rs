//! Street-level imagery providers.
//!
//! Three implementations ship: a seeded simulator with scriptable coverage
//! zones, a directory-backed corpus of pre-downloaded images, and a generic
//! HTTP endpoint.

use std::collections::{HashMap, HashSet};
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{image_id, ImageStatus, ProviderKind, ViewRequest};
use crate::error::{Error, Result};
use crate::geo::{haversine_m, GeoPoint};
use crate::io;

pub const PROVIDER_KEY_ENV: &str = "TAGMAP_PROVIDER_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct Payload {
    pub bytes: Vec<u8>,
    /// File extension without the dot, e.g. `png`.
    pub extension: String,
}

/// What a provider returned for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub status: ImageStatus,
    pub provider: ProviderKind,
    pub capture_year: Option<i32>,
    pub width_px: u32,
    pub height_px: u32,
    pub payload: Option<Payload>,
}

impl Capture {
    pub fn unmapped() -> Self {
        Capture {
            status: ImageStatus::Unmapped,
            provider: ProviderKind::FirstParty,
            capture_year: None,
            width_px: 0,
            height_px: 0,
            payload: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    /// Credentials rejected; retrying cannot help.
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("transient failure: {0}")]
    Transient(String),
}

pub trait ProviderClient: Send + Sync {
    fn fetch(&self, view: &ViewRequest, at: GeoPoint) -> Result<Capture, ProviderError>;

    /// Metadata without the image payload.
    fn probe(&self, view: &ViewRequest, at: GeoPoint) -> Result<Capture, ProviderError> {
        let mut c = self.fetch(view, at)?;
        c.payload = None;
        Ok(c)
    }
}

/// Circular zone used to script simulated coverage.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, serde::Serialize)]
pub struct Zone {
    pub center: GeoPoint,
    pub radius_m: f64,
}

impl Zone {
    pub fn contains(&self, p: GeoPoint) -> bool {
        haversine_m(self.center, p) <= self.radius_m
    }
}

/// Per-year point counts used as the simulator's capture-year distribution.
pub const DEFAULT_YEAR_WEIGHTS: [(i32, u32); 9] = [
    (2010, 1_241),
    (2011, 16_311),
    (2012, 207),
    (2013, 422),
    (2014, 2_182),
    (2015, 4_563),
    (2016, 4_211),
    (2017, 39_391),
    (2018, 317),
];

fn hash_u64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}

/// Deterministic stand-in for a street-view service.
#[derive(Debug)]
pub struct SimulatedProvider {
    seed: u64,
    external_zones: Vec<Zone>,
    unmapped_zones: Vec<Zone>,
    external_points: HashSet<String>,
    year_weights: Vec<(i32, u32)>,
    render_payload: bool,
    reject_auth: bool,
    transient: Mutex<HashMap<String, u32>>,
    calls: AtomicUsize,
}

impl SimulatedProvider {
    pub fn new(seed: u64) -> Self {
        SimulatedProvider {
            seed,
            external_zones: Vec::new(),
            unmapped_zones: Vec::new(),
            external_points: HashSet::new(),
            year_weights: DEFAULT_YEAR_WEIGHTS.to_vec(),
            render_payload: true,
            reject_auth: false,
            transient: Mutex::new(HashMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_external_zone(mut self, zone: Zone) -> Self {
        self.external_zones.push(zone);
        self
    }

    pub fn with_unmapped_zone(mut self, zone: Zone) -> Self {
        self.unmapped_zones.push(zone);
        self
    }

    /// Every view of this point comes back attributed to an external contributor.
    pub fn with_external_point(mut self, point_id: impl Into<String>) -> Self {
        self.external_points.insert(point_id.into());
        self
    }

    pub fn with_year_weights(mut self, weights: Vec<(i32, u32)>) -> Self {
        self.year_weights = weights;
        self
    }

    /// Skip PNG rendering; captures carry metadata only.
    pub fn without_payloads(mut self) -> Self {
        self.render_payload = false;
        self
    }

    /// The next `times` fetches of this view fail transiently.
    pub fn with_transient_failures(self, point_id: &str, heading_deg: f64, times: u32) -> Self {
        self.transient
            .lock()
            .unwrap()
            .insert(image_id(point_id, heading_deg), times);
        self
    }

    pub fn rejecting_credentials(mut self) -> Self {
        self.reject_auth = true;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn capture_year(&self, point_id: &str) -> Option<i32> {
        let total: u64 = self.year_weights.iter().map(|(_, w)| u64::from(*w)).sum();
        if total == 0 {
            return None;
        }
        let mut pick = hash_u64(&[&self.seed.to_le_bytes(), b"year", point_id.as_bytes()]) % total;
        for (year, w) in &self.year_weights {
            if pick < u64::from(*w) {
                return Some(*year);
            }
            pick -= u64::from(*w);
        }
        None
    }

    fn render(&self, view: &ViewRequest) -> Result<Payload, ProviderError> {
        let h = hash_u64(&[
            &self.seed.to_le_bytes(),
            b"pixels",
            image_id(&view.point_id, view.heading_deg).as_bytes(),
        ]);
        let rgb = image::Rgb([h as u8, (h >> 8) as u8, (h >> 16) as u8]);
        let img = image::RgbImage::from_pixel(view.width_px, view.height_px, rgb);
        let mut buf = Cursor::new(Vec::new());
        img.write_to(&mut buf, image::ImageFormat::Png)
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        Ok(Payload {
            bytes: buf.into_inner(),
            extension: "png".into(),
        })
    }

    fn capture(&self, view: &ViewRequest, at: GeoPoint, with_payload: bool) -> Result<Capture, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.reject_auth {
            return Err(ProviderError::Auth("simulated credential rejection".into()));
        }
        {
            let mut pending = self.transient.lock().unwrap();
            if let Some(left) = pending.get_mut(&image_id(&view.point_id, view.heading_deg)) {
                if *left > 0 {
                    *left -= 1;
                    return Err(ProviderError::Transient("simulated outage".into()));
                }
            }
        }
        if self.unmapped_zones.iter().any(|z| z.contains(at)) {
            return Ok(Capture::unmapped());
        }
        let provider = if self.external_points.contains(&view.point_id)
            || self.external_zones.iter().any(|z| z.contains(at))
        {
            ProviderKind::External
        } else {
            ProviderKind::FirstParty
        };
        let payload = if with_payload && self.render_payload {
            Some(self.render(view)?)
        } else {
            None
        };
        Ok(Capture {
            status: ImageStatus::Ok,
            provider,
            capture_year: self.capture_year(&view.point_id),
            width_px: view.width_px,
            height_px: view.height_px,
            payload,
        })
    }
}

impl ProviderClient for SimulatedProvider {
    fn fetch(&self, view: &ViewRequest, at: GeoPoint) -> Result<Capture, ProviderError> {
        self.capture(view, at, true)
    }

    fn probe(&self, view: &ViewRequest, at: GeoPoint) -> Result<Capture, ProviderError> {
        self.capture(view, at, false)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusMeta {
    file: String,
    #[serde(default)]
    capture_year: Option<i32>,
    #[serde(default)]
    provider: Option<ProviderKind>,
}

#[derive(Debug, Clone)]
struct CorpusEntry {
    path: PathBuf,
    capture_year: Option<i32>,
    provider: ProviderKind,
}

type CorpusKey = (i64, i64, i64);

fn corpus_key(lat: f64, lon: f64, heading: f64) -> CorpusKey {
    (
        (lat * 1e6).round() as i64,
        (lon * 1e6).round() as i64,
        (heading.rem_euclid(360.0) * 1e3).round() as i64,
    )
}

/// Local corpus of images named `_<lat>_<lon>_<heading>.<jpg|jpeg|png>`.
///
/// An optional `metadata.jsonl` in the same directory supplies
/// `{file, capture_year, provider}` per image. Locations match at 1e-6°.
#[derive(Debug)]
pub struct DirectoryProvider {
    entries: HashMap<CorpusKey, CorpusEntry>,
}

impl DirectoryProvider {
    pub fn open(dir: &Path) -> Result<Self> {
        let mut meta: HashMap<String, CorpusMeta> = HashMap::new();
        let meta_path = dir.join("metadata.jsonl");
        if meta_path.exists() {
            for (no, line) in io::read_lines(&meta_path)? {
                let m: CorpusMeta = io::parse_line(&meta_path, no, &line)?;
                meta.insert(m.file.clone(), m);
            }
        }
        let mut entries = HashMap::new();
        let listing = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in listing {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let Some(key) = parse_corpus_name(&name) else { continue };
            let m = meta.get(&name);
            entries.insert(
                key,
                CorpusEntry {
                    path: entry.path(),
                    capture_year: m.and_then(|m| m.capture_year),
                    provider: m.and_then(|m| m.provider).unwrap_or(ProviderKind::FirstParty),
                },
            );
        }
        Ok(DirectoryProvider { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn parse_corpus_name(name: &str) -> Option<CorpusKey> {
    let (stem, ext) = name.rsplit_once('.')?;
    if !matches!(ext.to_ascii_lowercase().as_str(), "jpg" | "jpeg" | "png") {
        return None;
    }
    let rest = stem.strip_prefix('_')?;
    let mut it = rest.split('_');
    let lat: f64 = it.next()?.parse().ok()?;
    let lon: f64 = it.next()?.parse().ok()?;
    let heading: f64 = it.next()?.parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some(corpus_key(lat, lon, heading))
}

impl ProviderClient for DirectoryProvider {
    fn fetch(&self, view: &ViewRequest, at: GeoPoint) -> Result<Capture, ProviderError> {
        let Some(entry) = self.entries.get(&corpus_key(at.lat(), at.lon(), view.heading_deg)) else {
            return Ok(Capture::unmapped());
        };
        let bytes = std::fs::read(&entry.path)
            .map_err(|e| ProviderError::Transient(format!("{}: {e}", entry.path.display())))?;
        let (width_px, height_px) = decode_dimensions(&bytes)?;
        let extension = entry
            .path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_else(|| "jpg".into());
        Ok(Capture {
            status: ImageStatus::Ok,
            provider: entry.provider,
            capture_year: entry.capture_year,
            width_px,
            height_px,
            payload: Some(Payload { bytes, extension }),
        })
    }
}

fn decode_dimensions(bytes: &[u8]) -> Result<(u32, u32), ProviderError> {
    image::ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| ProviderError::Transient(e.to_string()))?
        .into_dimensions()
        .map_err(|e| ProviderError::Transient(format!("undecodable image: {e}")))
}

/// Generic HTTP imagery endpoint.
///
/// Issues `GET <url>?lat=&lon=&heading=&fov=&w=&h=&key=`. A 200 response
/// body is the image; `x-capture-year` and `x-provider` (`first_party` or
/// `external`) headers carry metadata, and `x-imagery-status: unmapped`
/// marks locations without coverage. 401/403 abort the run; any other
/// non-200 status is a failed fetch.
pub struct HttpProvider {
    url: String,
    key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(url: impl Into<String>, key: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        HttpProvider {
            url: url.into(),
            key: key.into(),
            agent,
        }
    }

    /// Reads the API key from `TAGMAP_PROVIDER_KEY`.
    pub fn from_env(url: impl Into<String>) -> Result<Self> {
        let key = std::env::var(PROVIDER_KEY_ENV)
            .map_err(|_| Error::ProviderAuth(format!("{PROVIDER_KEY_ENV} is not set")))?;
        Ok(Self::new(url, key))
    }
}

impl ProviderClient for HttpProvider {
    fn fetch(&self, view: &ViewRequest, at: GeoPoint) -> Result<Capture, ProviderError> {
        let mut resp = self
            .agent
            .get(&self.url)
            .query("lat", at.lat().to_string())
            .query("lon", at.lon().to_string())
            .query("heading", view.heading_deg.to_string())
            .query("fov", view.fov_deg.to_string())
            .query("w", view.width_px.to_string())
            .query("h", view.height_px.to_string())
            .query("key", &self.key)
            .call()
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        match status {
            200 => {}
            401 | 403 => return Err(ProviderError::Auth(format!("HTTP {status}"))),
            _ => return Err(ProviderError::Transient(format!("HTTP {status}"))),
        }
        let header = |name: &str| {
            resp.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::trim)
                .map(String::from)
        };
        if header("x-imagery-status").as_deref() == Some("unmapped") {
            return Ok(Capture::unmapped());
        }
        let provider = match header("x-provider").as_deref() {
            Some("external") => ProviderKind::External,
            _ => ProviderKind::FirstParty,
        };
        let capture_year = header("x-capture-year").and_then(|y| y.parse().ok());
        let extension = match header("content-type").as_deref() {
            Some("image/png") => "png",
            _ => "jpg",
        }
        .to_string();
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(64 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let (width_px, height_px) = decode_dimensions(&bytes)?;
        Ok(Capture {
            status: ImageStatus::Ok,
            provider,
            capture_year,
            width_px,
            height_px,
            payload: Some(Payload { bytes, extension }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::plan_views;
    use crate::sampling::SamplePoint;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn simulator_is_deterministic_and_renders_png() {
        let p = SamplePoint::new(pt(-23.55, -46.63));
        let view = &plan_views(&p, 4).unwrap()[1];
        let a = SimulatedProvider::new(3).fetch(view, p.location).unwrap();
        let b = SimulatedProvider::new(3).fetch(view, p.location).unwrap();
        assert_eq!(a, b);
        let payload = a.payload.unwrap();
        assert_eq!(&payload.bytes[1..4], b"PNG");
        assert_eq!(decode_dimensions(&payload.bytes).unwrap(), (640, 640));
    }

    #[test]
    fn simulator_zones_and_scripted_points() {
        let inside = SamplePoint::new(pt(-23.55, -46.63));
        let outside = SamplePoint::new(pt(-23.45, -46.63));
        let sim = SimulatedProvider::new(1)
            .without_payloads()
            .with_external_zone(Zone { center: inside.location, radius_m: 500.0 })
            .with_unmapped_zone(Zone { center: pt(-23.65, -46.63), radius_m: 500.0 })
            .with_external_point(outside.point_id.clone());
        let v = &plan_views(&inside, 1).unwrap()[0];
        assert_eq!(sim.fetch(v, inside.location).unwrap().provider, ProviderKind::External);
        let v = &plan_views(&outside, 1).unwrap()[0];
        assert_eq!(sim.fetch(v, outside.location).unwrap().provider, ProviderKind::External);
        let far = SamplePoint::new(pt(-23.65, -46.63));
        let v = &plan_views(&far, 1).unwrap()[0];
        assert_eq!(sim.fetch(v, far.location).unwrap().status, ImageStatus::Unmapped);
        assert_eq!(sim.calls(), 3);
    }

    #[test]
    fn capture_years_follow_weights() {
        let sim = SimulatedProvider::new(9).with_year_weights(vec![(2015, 1), (2017, 3)]);
        let mut counts = HashMap::new();
        for i in 0..4000 {
            *counts.entry(sim.capture_year(&format!("p{i}")).unwrap()).or_insert(0) += 1;
        }
        let share = f64::from(counts[&2017]) / 4000.0;
        assert!((share - 0.75).abs() < 0.03, "{share}");
    }

    #[test]
    fn corpus_names_parse() {
        assert_eq!(
            parse_corpus_name("_-23.55229300_-46.50119900_180.jpg"),
            Some(corpus_key(-23.552293, -46.501199, 180.0))
        );
        assert_eq!(parse_corpus_name("notes.txt"), None);
        assert_eq!(parse_corpus_name("_1_2.jpg"), None);
    }

    #[test]
    fn directory_provider_reads_corpus_and_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let img = image::RgbImage::from_pixel(32, 24, image::Rgb([9, 9, 9]));
        img.save(dir.path().join("_-23.5000000_-46.6000000_90.png")).unwrap();
        std::fs::write(
            dir.path().join("metadata.jsonl"),
            "{\"file\":\"_-23.5000000_-46.6000000_90.png\",\"capture_year\":2016,\"provider\":\"external\"}\n",
        )
        .unwrap();
        let provider = DirectoryProvider::open(dir.path()).unwrap();
        assert_eq!(provider.len(), 1);
        let p = SamplePoint::new(pt(-23.5, -46.6));
        let views = plan_views(&p, 4).unwrap();
        let hit = provider.fetch(&views[1], p.location).unwrap();
        assert_eq!((hit.width_px, hit.height_px), (32, 24));
        assert_eq!(hit.capture_year, Some(2016));
        assert_eq!(hit.provider, ProviderKind::External);
        assert_eq!(hit.payload.unwrap().extension, "png");
        assert_eq!(provider.fetch(&views[0], p.location).unwrap().status, ImageStatus::Unmapped);
    }
}
