//! View planning and image acquisition.
//!
//! Every sampled location is photographed at `k` evenly spaced compass
//! headings. Fetches go through a [`ProviderClient`] under a shared rate
//! limiter and a bounded worker pool; results land in an append-only
//! [`Manifest`] in plan order, so reruns are byte-stable. Views already in
//! the manifest are never fetched again.

mod clock;
mod provider;

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use clock::{Clock, RateLimiter, SimulatedClock, SystemClock};
pub use provider::{
    Capture, DirectoryProvider, HttpProvider, Payload, ProviderClient, ProviderError, SimulatedProvider, Zone,
    DEFAULT_YEAR_WEIGHTS, PROVIDER_KEY_ENV,
};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::io;
use crate::metrics::YearHistogram;
use crate::sampling::{SamplePlan, SamplePoint};

pub const DEFAULT_VIEWS_PER_POINT: usize = 4;
pub const DEFAULT_FOV_DEG: f64 = 90.0;
pub const DEFAULT_IMAGE_SIZE_PX: u32 = 640;
pub const DEFAULT_RATE_PER_SEC: f64 = 10.0;
pub const DEFAULT_WORKERS: usize = 8;
pub const DEFAULT_MAX_RETRIES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRequest {
    pub point_id: String,
    pub heading_deg: f64,
    pub fov_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewOptions {
    pub fov_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
}

impl Default for ViewOptions {
    fn default() -> Self {
        ViewOptions {
            fov_deg: DEFAULT_FOV_DEG,
            width_px: DEFAULT_IMAGE_SIZE_PX,
            height_px: DEFAULT_IMAGE_SIZE_PX,
        }
    }
}

/// `k` headings at `i * 360 / k`, starting due north.
pub fn plan_views(point: &SamplePoint, k: usize) -> Result<Vec<ViewRequest>> {
    plan_views_with(point, k, ViewOptions::default())
}

pub fn plan_views_with(point: &SamplePoint, k: usize, opts: ViewOptions) -> Result<Vec<ViewRequest>> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    if !(opts.fov_deg > 0.0 && opts.fov_deg <= 120.0) {
        return Err(Error::Config(format!("fov {} outside (0, 120]", opts.fov_deg)));
    }
    if opts.width_px == 0 || opts.height_px == 0 {
        return Err(Error::Config("view dimensions must be positive".into()));
    }
    Ok((0..k)
        .map(|i| ViewRequest {
            point_id: point.point_id.clone(),
            heading_deg: i as f64 * 360.0 / k as f64,
            fov_deg: opts.fov_deg,
            width_px: opts.width_px,
            height_px: opts.height_px,
        })
        .collect())
}

/// Stable identifier of the view of `point_id` at `heading_deg`.
pub fn image_id(point_id: &str, heading_deg: f64) -> String {
    let digest = io::sha256_hex(format!("{point_id}@{heading_deg:.6}").as_bytes());
    digest[..20].to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    FirstParty,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageStatus {
    Ok,
    Unmapped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRecord {
    pub image_id: String,
    pub point_id: String,
    pub heading_deg: f64,
    pub capture_year: Option<i32>,
    pub provider: ProviderKind,
    pub width_px: u32,
    pub height_px: u32,
    pub storage_ref: Option<String>,
    pub status: ImageStatus,
}

impl ImageRecord {
    fn validate(&self) -> Result<()> {
        if self.status == ImageStatus::Ok
            && (self.storage_ref.is_none() || self.width_px == 0 || self.height_px == 0)
        {
            return Err(Error::Format(format!(
                "record {} is ok but lacks storage or dimensions",
                self.image_id
            )));
        }
        Ok(())
    }
}

/// Append-only, duplicate-free sequence of image records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    records: Vec<ImageRecord>,
    index: HashMap<String, usize>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, record: ImageRecord) -> Result<()> {
        record.validate()?;
        if self.index.contains_key(&record.image_id) {
            return Err(Error::DuplicateImageId(record.image_id));
        }
        self.index.insert(record.image_id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageRecord> {
        self.index.get(image_id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        self.records.iter().map(io::to_json_line).collect()
    }

    /// Reads a manifest; a missing file is an empty manifest.
    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let mut m = Manifest::new();
        if !path.exists() {
            return Ok(m);
        }
        for (no, line) in io::read_lines(path)? {
            m.append(io::parse_line(path, no, &line)?)?;
        }
        Ok(m)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_jsonl()?.as_bytes())
    }

    /// Appends `records()[from..]` to the file at `path`.
    pub fn append_to_file(&self, path: &Path, from: usize) -> Result<()> {
        if from >= self.records.len() {
            return Ok(());
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut buf = String::new();
        for r in &self.records[from..] {
            buf.push_str(&io::to_json_line(r)?);
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Counts ok records per capture year; records without a year go to `unknown`.
pub fn year_histogram(manifest: &Manifest) -> YearHistogram {
    let mut h = YearHistogram::default();
    for r in manifest.records.iter().filter(|r| r.status == ImageStatus::Ok) {
        h.add(r.capture_year, 1);
    }
    h
}

/// Where fetched image payloads go.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageStore {
    /// Files land in `root/subdir`; records store the `subdir/...` relative path.
    Directory { root: PathBuf, subdir: String },
    /// Only metadata is probed; records get a `meta://<image_id>` reference.
    MetadataOnly,
}

impl ImageStore {
    pub fn beside_manifest(manifest_path: &Path) -> Self {
        let root = manifest_path
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        ImageStore::Directory {
            root,
            subdir: "images".into(),
        }
    }
}

/// Resolves a record's storage reference relative to the manifest directory.
pub fn resolve_storage(manifest_dir: &Path, storage_ref: &str) -> Option<PathBuf> {
    if storage_ref.contains("://") {
        return None;
    }
    let p = Path::new(storage_ref);
    Some(if p.is_absolute() { p.to_path_buf() } else { manifest_dir.join(p) })
}

#[derive(Clone)]
pub struct AcquireOptions {
    pub view: ViewOptions,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub backoff_factor: f64,
    pub workers: usize,
    /// Requests per second; `None` disables limiting.
    pub rate_per_sec: Option<f64>,
    pub clock: Arc<dyn Clock>,
    pub store: ImageStore,
}

impl Default for AcquireOptions {
    fn default() -> Self {
        AcquireOptions {
            view: ViewOptions::default(),
            max_retries: DEFAULT_MAX_RETRIES,
            backoff_base: Duration::from_secs(1),
            backoff_factor: 2.0,
            workers: DEFAULT_WORKERS,
            rate_per_sec: Some(DEFAULT_RATE_PER_SEC),
            clock: Arc::new(SystemClock::new()),
            store: ImageStore::MetadataOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AcquireStats {
    pub views: usize,
    pub cached: usize,
    pub ok: usize,
    pub unmapped: usize,
    pub failed: usize,
    pub client_calls: usize,
}

struct Job {
    view: ViewRequest,
    at: GeoPoint,
}

/// Fetches every (point, heading) view of `plan` not already in `manifest`.
///
/// Transient failures are retried with exponential backoff and finally
/// recorded as `failed`; a credential error aborts the run after keeping the
/// records completed before it.
pub fn acquire(
    plan: &SamplePlan,
    k: usize,
    client: &dyn ProviderClient,
    manifest: &mut Manifest,
    opts: &AcquireOptions,
) -> Result<AcquireStats> {
    let mut stats = AcquireStats::default();
    let mut jobs = Vec::new();
    for point in &plan.points {
        for view in plan_views_with(point, k, opts.view)? {
            stats.views += 1;
            if manifest.get(&image_id(&view.point_id, view.heading_deg)).is_some() {
                stats.cached += 1;
            } else {
                jobs.push(Job {
                    view,
                    at: point.location,
                });
            }
        }
    }
    if jobs.is_empty() {
        return Ok(stats);
    }

    let limiter = opts.rate_per_sec.map(RateLimiter::new);
    let next = AtomicUsize::new(0);
    let calls = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = opts.workers.clamp(1, jobs.len());
    let (tx, rx) = mpsc::channel::<(usize, Result<ImageRecord>)>();
    let mut first_error = None;

    std::thread::scope(|s| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next, calls, abort, limiter) = (&jobs, &next, &calls, &abort, &limiter);
            s.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let result = fetch_one(job, client, opts, limiter.as_ref(), calls);
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // single writer: append strictly in job order
        let mut pending = BTreeMap::new();
        let mut expected = 0usize;
        for (i, result) in rx {
            match result {
                Ok(rec) => {
                    pending.insert(i, rec);
                }
                Err(e) => {
                    abort.store(true, Ordering::SeqCst);
                    if first_error.is_none() {
                        first_error = Some((i, e));
                    }
                }
            }
            let stop_at = first_error.as_ref().map_or(usize::MAX, |(i, _)| *i);
            while expected < stop_at {
                let Some(rec) = pending.remove(&expected) else { break };
                match rec.status {
                    ImageStatus::Ok => stats.ok += 1,
                    ImageStatus::Unmapped => stats.unmapped += 1,
                    ImageStatus::Failed => stats.failed += 1,
                }
                if let Err(e) = manifest.append(rec) {
                    abort.store(true, Ordering::SeqCst);
                    first_error.get_or_insert((expected, e));
                    break;
                }
                expected += 1;
            }
        }
    });

    stats.client_calls = calls.load(Ordering::SeqCst);
    match first_error {
        Some((_, e)) => Err(e),
        None => Ok(stats),
    }
}

fn fetch_one(
    job: &Job,
    client: &dyn ProviderClient,
    opts: &AcquireOptions,
    limiter: Option<&RateLimiter>,
    calls: &AtomicUsize,
) -> Result<ImageRecord> {
    let view = &job.view;
    let id = image_id(&view.point_id, view.heading_deg);
    let metadata_only = opts.store == ImageStore::MetadataOnly;
    let mut delay = opts.backoff_base;
    let mut capture = None;
    for attempt in 0..=opts.max_retries {
        if let Some(l) = limiter {
            l.acquire(opts.clock.as_ref());
        }
        calls.fetch_add(1, Ordering::SeqCst);
        let result = if metadata_only {
            client.probe(view, job.at)
        } else {
            client.fetch(view, job.at)
        };
        match result {
            Ok(c) => {
                capture = Some(c);
                break;
            }
            Err(ProviderError::Auth(msg)) => return Err(Error::ProviderAuth(msg)),
            Err(ProviderError::Transient(msg)) => {
                log::debug!("view {id} attempt {} failed: {msg}", attempt + 1);
                if attempt < opts.max_retries {
                    opts.clock.sleep(delay);
                    delay = delay.mul_f64(opts.backoff_factor);
                }
            }
        }
    }

    let Some(capture) = capture else {
        return Ok(ImageRecord {
            image_id: id,
            point_id: view.point_id.clone(),
            heading_deg: view.heading_deg,
            capture_year: None,
            provider: ProviderKind::FirstParty,
            width_px: 0,
            height_px: 0,
            storage_ref: None,
            status: ImageStatus::Failed,
        });
    };

    let storage_ref = match (capture.status, &opts.store) {
        (ImageStatus::Ok, ImageStore::MetadataOnly) => Some(format!("meta://{id}")),
        (ImageStatus::Ok, ImageStore::Directory { root, subdir }) => {
            let payload = capture.payload.as_ref().ok_or_else(|| {
                Error::Backend(format!("provider returned no image payload for {id}"))
            })?;
            let rel = format!("{subdir}/{id}.{}", payload.extension);
            let path = root.join(&rel);
            io::write_atomic(&path, &payload.bytes)?;
            Some(rel)
        }
        _ => None,
    };
    Ok(ImageRecord {
        image_id: id,
        point_id: view.point_id.clone(),
        heading_deg: view.heading_deg,
        capture_year: capture.capture_year,
        provider: capture.provider,
        width_px: capture.width_px,
        height_px: capture.height_px,
        storage_ref,
        status: capture.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::sampling::GridSpec;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn plan(n: usize) -> SamplePlan {
        SamplePlan {
            spec: GridSpec::default(),
            region_id: "r".into(),
            points: (0..n).map(|i| SamplePoint::new(pt(-23.5 - i as f64 * 0.001, -46.6))).collect(),
        }
    }

    fn fast_opts() -> AcquireOptions {
        AcquireOptions {
            clock: Arc::new(SimulatedClock::new()),
            ..Default::default()
        }
    }

    fn headings(k: usize) -> Vec<f64> {
        let p = SamplePoint::new(pt(0.0, 0.0));
        plan_views(&p, k).unwrap().iter().map(|v| v.heading_deg).collect()
    }

    #[test]
    fn view_headings() {
        assert_eq!(headings(4), vec![0.0, 90.0, 180.0, 270.0]);
        assert_eq!(headings(1), vec![0.0]);
        assert_eq!(headings(3), vec![0.0, 120.0, 240.0]);
        let p = SamplePoint::new(pt(0.0, 0.0));
        assert!(matches!(plan_views(&p, 0), Err(Error::InvalidK)));
        let v = &plan_views(&p, 2).unwrap()[0];
        assert_eq!((v.fov_deg, v.width_px, v.height_px), (90.0, 640, 640));
    }

    #[test]
    fn image_ids_are_stable_and_distinct() {
        assert_eq!(image_id("a", 90.0), image_id("a", 90.0));
        assert_ne!(image_id("a", 90.0), image_id("a", 180.0));
        assert_ne!(image_id("a", 90.0), image_id("b", 90.0));
        assert_eq!(image_id("a", 90.0).len(), 20);
    }

    #[test]
    fn two_points_four_views_all_ok() {
        let sim = SimulatedProvider::new(1).without_payloads();
        let mut m = Manifest::new();
        let stats = acquire(&plan(2), 4, &sim, &mut m, &fast_opts()).unwrap();
        assert_eq!(m.len(), 8);
        assert!(m.records().iter().all(|r| r.status == ImageStatus::Ok));
        assert_eq!(stats.ok, 8);
        assert_eq!(stats.client_calls, 8);
    }

    #[test]
    fn second_run_is_served_from_cache() {
        let sim = SimulatedProvider::new(1).without_payloads();
        let p = plan(3);
        let mut m = Manifest::new();
        acquire(&p, 4, &sim, &mut m, &fast_opts()).unwrap();
        let before = m.clone();
        let calls = sim.calls();
        let stats = acquire(&p, 4, &sim, &mut m, &fast_opts()).unwrap();
        assert_eq!(sim.calls(), calls);
        assert_eq!(stats.client_calls, 0);
        assert_eq!(stats.cached, 12);
        assert_eq!(m, before);
    }

    #[test]
    fn external_point_flows_into_records() {
        let p = plan(2);
        let sim = SimulatedProvider::new(1)
            .without_payloads()
            .with_external_point(p.points[1].point_id.clone());
        let mut m = Manifest::new();
        acquire(&p, 4, &sim, &mut m, &fast_opts()).unwrap();
        let ext: Vec<_> = m.records().iter().filter(|r| r.provider == ProviderKind::External).collect();
        assert_eq!(ext.len(), 4);
        assert!(ext.iter().all(|r| r.point_id == p.points[1].point_id));
        let kept = crate::sampling::coverage_filter(&p, &m, 4).unwrap();
        assert_eq!(kept.points, vec![p.points[0].clone()]);
    }

    #[test]
    fn transient_failures_retry_with_backoff() {
        let p = plan(1);
        let pid = p.points[0].point_id.clone();
        let sim = SimulatedProvider::new(1)
            .without_payloads()
            .with_transient_failures(&pid, 0.0, 2)
            .with_transient_failures(&pid, 180.0, 10);
        let opts = AcquireOptions {
            rate_per_sec: None,
            workers: 1,
            ..fast_opts()
        };
        let mut m = Manifest::new();
        let stats = acquire(&p, 2, &sim, &mut m, &opts).unwrap();
        assert_eq!(m.get(&image_id(&pid, 0.0)).unwrap().status, ImageStatus::Ok);
        assert_eq!(m.get(&image_id(&pid, 180.0)).unwrap().status, ImageStatus::Failed);
        // 3 calls for the first view, 1 + 3 retries for the second
        assert_eq!(stats.client_calls, 7);
        assert_eq!((stats.ok, stats.failed), (1, 1));
        // backoff: 1 + 2 for the first view, 1 + 2 + 4 for the second
        assert_eq!(opts.clock.now(), Duration::from_secs(10));
    }

    #[test]
    fn credential_rejection_aborts() {
        let sim = SimulatedProvider::new(1).rejecting_credentials();
        let mut m = Manifest::new();
        let err = acquire(&plan(2), 4, &sim, &mut m, &fast_opts()).unwrap_err();
        assert!(matches!(err, Error::ProviderAuth(_)));
        assert!(m.is_empty());
    }

    #[test]
    fn rate_limit_bounds_simulated_duration() {
        let sim = SimulatedProvider::new(4).without_payloads();
        let opts = fast_opts();
        let mut m = Manifest::new();
        acquire(&plan(10), 4, &sim, &mut m, &opts).unwrap();
        assert!(opts.clock.now().as_secs_f64() + 1e-9 >= 39.0 / DEFAULT_RATE_PER_SEC);
    }

    #[test]
    fn manifest_order_is_plan_order_regardless_of_workers() {
        let p = plan(6);
        let mut a = Manifest::new();
        let mut b = Manifest::new();
        let sim = SimulatedProvider::new(2).without_payloads();
        acquire(&p, 4, &sim, &mut a, &AcquireOptions { workers: 1, ..fast_opts() }).unwrap();
        acquire(&p, 4, &sim, &mut b, &AcquireOptions { workers: 8, ..fast_opts() }).unwrap();
        assert_eq!(a.to_jsonl().unwrap(), b.to_jsonl().unwrap());
    }

    #[test]
    fn payloads_are_stored_beside_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = dir.path().join("manifest.jsonl");
        let opts = AcquireOptions {
            store: ImageStore::beside_manifest(&manifest_path),
            view: ViewOptions {
                width_px: 64,
                height_px: 48,
                ..Default::default()
            },
            ..fast_opts()
        };
        let mut m = Manifest::new();
        acquire(&plan(1), 2, &SimulatedProvider::new(5), &mut m, &opts).unwrap();
        for r in m.records() {
            let rel = r.storage_ref.as_deref().unwrap();
            assert!(rel.starts_with("images/"));
            let path = resolve_storage(dir.path(), rel).unwrap();
            let (w, h) = image::image_dimensions(path).unwrap();
            assert_eq!((w, h), (64, 48));
        }
        m.append_to_file(&manifest_path, 0).unwrap();
        assert_eq!(Manifest::read_jsonl(&manifest_path).unwrap(), m);
    }

    #[test]
    fn manifest_rejects_duplicates_and_invalid_records() {
        let mut m = Manifest::new();
        let rec = ImageRecord {
            image_id: "x".into(),
            point_id: "p".into(),
            heading_deg: 0.0,
            capture_year: None,
            provider: ProviderKind::FirstParty,
            width_px: 1,
            height_px: 1,
            storage_ref: Some("a.png".into()),
            status: ImageStatus::Ok,
        };
        m.append(rec.clone()).unwrap();
        assert!(matches!(m.append(rec.clone()), Err(Error::DuplicateImageId(_))));
        let bad = ImageRecord {
            image_id: "y".into(),
            storage_ref: None,
            ..rec
        };
        assert!(m.append(bad).is_err());
    }

    #[test]
    fn manifest_lines_use_exact_field_names() {
        let sim = SimulatedProvider::new(1).without_payloads();
        let mut m = Manifest::new();
        acquire(&plan(1), 1, &sim, &mut m, &fast_opts()).unwrap();
        let line: serde_json::Value = serde_json::from_str(m.to_jsonl().unwrap().lines().next().unwrap()).unwrap();
        let mut keys: Vec<_> = line.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "capture_year", "heading_deg", "height_px", "image_id", "point_id", "provider", "status",
                "storage_ref", "width_px"
            ]
        );
        assert_eq!(line["provider"], "first_party");
        assert_eq!(line["status"], "ok");
    }

    fn table_one_manifest() -> Manifest {
        let mut m = Manifest::new();
        for (year, count) in DEFAULT_YEAR_WEIGHTS {
            for i in 0..count {
                m.append(ImageRecord {
                    image_id: format!("{year}-{i}"),
                    point_id: format!("{year}-{i}"),
                    heading_deg: 0.0,
                    capture_year: Some(year),
                    provider: ProviderKind::FirstParty,
                    width_px: 640,
                    height_px: 640,
                    storage_ref: Some("x".into()),
                    status: ImageStatus::Ok,
                })
                .unwrap();
            }
        }
        m
    }

    #[test]
    fn table_one_histogram() {
        let h = year_histogram(&table_one_manifest());
        assert_eq!(h.count(2010), 1241);
        assert_eq!(h.count(2017), 39391);
        assert_eq!(h.total(), 68_845);
        assert_eq!(h.unknown, 0);
        assert!((h.share(2017) - 39_391.0 / 68_845.0).abs() < 1e-15);
        assert_eq!(format!("{:.1}", 100.0 * h.share(2017)), "57.2");
    }

    #[test]
    fn histogram_skips_non_ok_and_buckets_unknown_years() {
        let mut m = Manifest::new();
        assert_eq!(year_histogram(&m).total(), 0);
        let base = ImageRecord {
            image_id: "a".into(),
            point_id: "p".into(),
            heading_deg: 0.0,
            capture_year: None,
            provider: ProviderKind::FirstParty,
            width_px: 1,
            height_px: 1,
            storage_ref: Some("s".into()),
            status: ImageStatus::Ok,
        };
        m.append(base.clone()).unwrap();
        m.append(ImageRecord {
            image_id: "b".into(),
            capture_year: Some(2012),
            status: ImageStatus::Failed,
            storage_ref: None,
            ..base
        })
        .unwrap();
        let h = year_histogram(&m);
        assert_eq!(h.unknown, 1);
        assert_eq!(h.total(), 1);
        assert_eq!(h.count(2012), 0);
    }
}
