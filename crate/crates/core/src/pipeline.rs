//! Stage orchestration shared by the command line, the examples and the demo run.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::acquisition::{
    self, image_id, plan_views, AcquireOptions, AcquireStats, DirectoryProvider, HttpProvider, ImageStatus,
    ImageStore, Manifest, ProviderClient, SimulatedClock, SimulatedProvider, SystemClock, ViewOptions, Zone,
    DEFAULT_FOV_DEG, DEFAULT_IMAGE_SIZE_PX, DEFAULT_MAX_RETRIES, DEFAULT_RATE_PER_SEC, DEFAULT_VIEWS_PER_POINT,
    DEFAULT_WORKERS,
};
use crate::detection::{
    detection_path, DetectionSet, DetectorBackend, FileBackend, ImageInput, RemoteBackend, SyntheticBackend,
    DEFAULT_TAU,
};
use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_IOU_THRESHOLD;
use crate::geo::{GeoPoint, RegionPolygon, METERS_PER_DEGREE};
use crate::io;
use crate::metrics::{
    assign_region, levels_csv, location_level, score_by_region, scores_csv, Dedup, LevelOptions, LocationLevel,
    Mode, RegionScores, ViewDetections,
};
use crate::report::{timestamp_now, ReportBundle, RunMetadata};
use crate::sampling::{build_plan, coverage_filter, GridSpec, SamplePlan, Strategy, DEFAULT_SPACING_M};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderSelect {
    #[default]
    Simulated,
    Directory,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorSelect {
    #[default]
    Synthetic,
    File,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub strategy: Strategy,
    pub spacing_m: f64,
    pub n_random: usize,
    pub seed: u64,
    pub anchor: Option<GeoPoint>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            strategy: Strategy::Systematic,
            spacing_m: DEFAULT_SPACING_M,
            n_random: 100,
            seed: 0,
            anchor: None,
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            strategy: self.strategy,
            spacing_m: self.spacing_m,
            anchor: self.anchor,
            n_random: self.n_random,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderConfig {
    pub kind: ProviderSelect,
    /// Simulated provider seed.
    pub seed: u64,
    /// Image directory for the directory provider.
    pub dir: Option<PathBuf>,
    /// Service root for the HTTP provider; the key comes from the environment.
    pub url: Option<String>,
    pub rate_per_sec: f64,
    pub workers: usize,
    pub max_retries: u32,
    /// Keep image payloads next to the manifest instead of metadata only.
    pub store_images: bool,
    pub fov_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
    /// Simulated coverage served by a third party.
    pub external_zones: Vec<Zone>,
    /// Simulated areas without imagery.
    pub unmapped_zones: Vec<Zone>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderSelect::Simulated,
            seed: 0,
            dir: None,
            url: None,
            rate_per_sec: DEFAULT_RATE_PER_SEC,
            workers: DEFAULT_WORKERS,
            max_retries: DEFAULT_MAX_RETRIES,
            store_images: false,
            fov_deg: DEFAULT_FOV_DEG,
            width_px: DEFAULT_IMAGE_SIZE_PX,
            height_px: DEFAULT_IMAGE_SIZE_PX,
            external_zones: Vec::new(),
            unmapped_zones: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub kind: DetectorSelect,
    pub seed: u64,
    pub mean_regions: f64,
    /// Precomputed detection files for the file backend.
    pub dir: Option<PathBuf>,
    /// Detector service root for the remote backend.
    pub url: Option<String>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            kind: DetectorSelect::Synthetic,
            seed: 0,
            mean_regions: 1.0,
            dir: None,
            url: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    /// JSON density field; a seeded random field is used when unset.
    pub field: Option<PathBuf>,
    pub bumps: usize,
    pub field_seed: u64,
    pub spacings_m: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub runs: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            field: None,
            bumps: 2,
            field_seed: 0,
            spacings_m: vec![400.0, 200.0, 100.0],
            sample_sizes: vec![100, 400],
            runs: 200,
        }
    }
}

/// Every tunable of a run. Unknown keys are rejected when loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub region: Option<PathBuf>,
    pub plan: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub grid: GridConfig,
    pub k: usize,
    pub provider: ProviderConfig,
    pub detector: DetectorConfig,
    pub tau: f64,
    pub mode: Mode,
    pub dedup: Dedup,
    pub iou_threshold: f64,
    pub simulation: SimulationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            region: None,
            plan: None,
            manifest: None,
            detections: None,
            ground_truth: None,
            out: None,
            grid: GridConfig::default(),
            k: DEFAULT_VIEWS_PER_POINT,
            provider: ProviderConfig::default(),
            detector: DetectorConfig::default(),
            tau: DEFAULT_TAU,
            mode: Mode::Fraction,
            dedup: Dedup::Union,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            simulation: SimulationConfig::default(),
        }
    }
}

/// Parses an override value as JSON, falling back to a bare string.
pub fn parse_override(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets a dotted key inside a JSON object, creating intermediate objects.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed key {key:?}")));
    }
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {} is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*part).to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

impl PipelineConfig {
    /// Defaults, then the config file, then `key=value` overrides (later wins).
    pub fn load(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut value = serde_json::to_value(PipelineConfig::default()).map_err(|e| Error::json("defaults", e))?;
        if let Some(path) = file {
            let from_file: Value = io::read_json(path)?;
            if !from_file.is_object() {
                return Err(Error::Config(format!("{} must hold a JSON object", path.display())));
            }
            merge(&mut value, from_file);
        }
        for (k, v) in overrides {
            set_path(&mut value, k, v.clone())?;
        }
        let config: PipelineConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k == 0 {
            return Err(Error::InvalidK);
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau {} outside [0, 1]", self.tau));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return bad(format!("iou_threshold {} outside (0, 1]", self.iou_threshold));
        }
        if !(self.grid.spacing_m.is_finite() && self.grid.spacing_m > 0.0) {
            return Err(Error::InvalidSpacing(self.grid.spacing_m));
        }
        if self.grid.strategy == Strategy::Random && self.grid.n_random == 0 {
            return bad("grid.n_random must be positive".into());
        }
        let p = &self.provider;
        if !(p.rate_per_sec.is_finite() && p.rate_per_sec > 0.0) {
            return bad(format!("provider.rate_per_sec {} must be positive", p.rate_per_sec));
        }
        if p.workers == 0 {
            return bad("provider.workers must be positive".into());
        }
        if !(p.fov_deg > 0.0 && p.fov_deg <= 120.0) || p.width_px == 0 || p.height_px == 0 {
            return bad("provider view settings need fov in (0, 120] and nonzero dimensions".into());
        }
        if !(self.detector.mean_regions.is_finite() && self.detector.mean_regions >= 0.0) {
            return bad("detector.mean_regions must be >= 0".into());
        }
        let s = &self.simulation;
        if s.runs == 0 || s.spacings_m.iter().any(|v| !(v.is_finite() && *v > 0.0)) || s.sample_sizes.contains(&0) {
            return bad("simulation needs runs >= 1, positive spacings and sample sizes".into());
        }
        Ok(())
    }

    /// Hash of the configuration with the output location removed, so the
    /// same run written to two places hashes alike.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        io::sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }

    pub fn level_options(&self) -> LevelOptions {
        LevelOptions {
            mode: self.mode,
            dedup: self.dedup,
            tau: self.tau,
        }
    }

    pub fn require<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        field
            .as_deref()
            .ok_or_else(|| Error::Config(format!("missing required setting {name}")))
    }
}

/// Provider client selected by the configuration.
pub fn provider_from_config(c: &ProviderConfig) -> Result<Box<dyn ProviderClient>> {
    Ok(match c.kind {
        ProviderSelect::Simulated => {
            let mut sim = SimulatedProvider::new(c.seed);
            for z in &c.external_zones {
                sim = sim.with_external_zone(*z);
            }
            for z in &c.unmapped_zones {
                sim = sim.with_unmapped_zone(*z);
            }
            if !c.store_images {
                sim = sim.without_payloads();
            }
            Box::new(sim)
        }
        ProviderSelect::Directory => {
            let dir = c
                .dir
                .as_deref()
                .ok_or_else(|| Error::Config("provider.dir is required for the directory provider".into()))?;
            Box::new(DirectoryProvider::open(dir)?)
        }
        ProviderSelect::Http => {
            let url = c
                .url
                .as_deref()
                .ok_or_else(|| Error::Config("provider.url is required for the http provider".into()))?;
            Box::new(HttpProvider::from_env(url)?)
        }
    })
}

/// Acquisition options for the configured provider. The simulated provider
/// runs against a simulated clock so rate limits and backoff cost no time.
pub fn acquire_options(c: &ProviderConfig, manifest_path: &Path) -> AcquireOptions {
    AcquireOptions {
        view: ViewOptions {
            fov_deg: c.fov_deg,
            width_px: c.width_px,
            height_px: c.height_px,
        },
        max_retries: c.max_retries,
        workers: c.workers,
        rate_per_sec: Some(c.rate_per_sec),
        clock: match c.kind {
            ProviderSelect::Simulated => Arc::new(SimulatedClock::new()),
            _ => Arc::new(SystemClock::new()),
        },
        store: if c.store_images {
            ImageStore::beside_manifest(manifest_path)
        } else {
            ImageStore::MetadataOnly
        },
        ..AcquireOptions::default()
    }
}

pub fn detector_from_config(c: &DetectorConfig) -> Result<Box<dyn DetectorBackend>> {
    Ok(match c.kind {
        DetectorSelect::Synthetic => Box::new(SyntheticBackend::new(c.seed).with_mean_regions(c.mean_regions)),
        DetectorSelect::File => Box::new(FileBackend::new(
            c.dir
                .clone()
                .ok_or_else(|| Error::Config("detector.dir is required for the file backend".into()))?,
        )),
        DetectorSelect::Remote => Box::new(RemoteBackend::new(
            c.url
                .as_deref()
                .ok_or_else(|| Error::Config("detector.url is required for the remote backend".into()))?,
        )),
    })
}

/// Acquires a plan into the manifest file at `manifest_path`, appending only
/// new records.
pub fn acquire_to_file(
    plan: &SamplePlan,
    k: usize,
    client: &dyn ProviderClient,
    manifest_path: &Path,
    opts: &AcquireOptions,
) -> Result<AcquireStats> {
    let mut manifest = Manifest::read_jsonl(manifest_path)?;
    let before = manifest.len();
    let result = acquisition::acquire(plan, k, client, &mut manifest, opts);
    manifest.append_to_file(manifest_path, before)?;
    result
}

pub fn manifest_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs the detector on every `ok` image and writes one detection file per
/// image into `out_dir`. Returns the number of images processed.
pub fn run_detection(
    manifest: &Manifest,
    manifest_dir: &Path,
    backend: &dyn DetectorBackend,
    out_dir: &Path,
) -> Result<usize> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ok: Vec<_> = manifest.records().iter().filter(|r| r.status == ImageStatus::Ok).collect();
    ok.par_iter()
        .map(|r| {
            let set = backend.detect(&ImageInput::from_record(r, manifest_dir))?;
            set.write(&detection_path(out_dir, &r.image_id))
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(ok.len())
}

/// Levels for every plan point with full first-party coverage, in plan
/// order, together with the surviving plan. Views without a detection file
/// count as having no detections.
pub fn compute_levels(
    plan: &SamplePlan,
    manifest: &Manifest,
    detections: &BTreeMap<String, DetectionSet>,
    k: usize,
    opts: &LevelOptions,
) -> Result<(SamplePlan, Vec<LocationLevel>)> {
    let covered = coverage_filter(plan, manifest, k)?;
    let levels = covered
        .points
        .par_iter()
        .map(|p| {
            let mut sets: Vec<(Cow<'_, DetectionSet>, _)> = Vec::with_capacity(k);
            for view in plan_views(p, k)? {
                let id = image_id(&view.point_id, view.heading_deg);
                let dims = manifest.get(&id).map(|r| (r.width_px, r.height_px));
                let set = match detections.get(&id) {
                    Some(s) => {
                        s.validate(dims)?;
                        Cow::Borrowed(s)
                    }
                    None => Cow::Owned(DetectionSet::empty(&id, "none")),
                };
                sets.push((set, dims));
            }
            let views: Vec<ViewDetections<'_>> = sets.iter().map(|(s, d)| ViewDetections { set: s, dims: *d }).collect();
            location_level(&p.point_id, &views, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((covered, levels))
}

/// Region id of every level's point.
pub fn assign_points(
    regions: &[RegionPolygon],
    plan: &SamplePlan,
    levels: &[LocationLevel],
) -> Result<BTreeMap<String, String>> {
    let locations: BTreeMap<&str, GeoPoint> = plan.points.iter().map(|p| (p.point_id.as_str(), p.location)).collect();
    let mut out = BTreeMap::new();
    for l in levels {
        if let Some(&loc) = locations.get(l.point_id.as_str()) {
            if let Some(i) = assign_region(&l.point_id, loc, regions)? {
                out.insert(l.point_id.clone(), regions[i].region_id.clone());
            }
        }
    }
    Ok(out)
}

/// Everything the report stage reads.
pub struct ReportInputs<'a> {
    pub regions: &'a [RegionPolygon],
    pub plan: &'a SamplePlan,
    pub manifest: &'a Manifest,
    pub manifest_path: &'a Path,
    pub detections: &'a BTreeMap<String, DetectionSet>,
    pub k: usize,
    pub level_options: LevelOptions,
    pub config_hash: String,
}

pub fn build_report(inputs: &ReportInputs<'_>) -> Result<(ReportBundle, RegionScores)> {
    let (covered, levels) = compute_levels(inputs.plan, inputs.manifest, inputs.detections, inputs.k, &inputs.level_options)?;
    let scores = score_by_region(inputs.regions, &covered, &levels)?;
    let region_of = assign_points(inputs.regions, &covered, &levels)?;
    let metadata = RunMetadata {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: inputs.config_hash.clone(),
        manifest: inputs
            .manifest_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        manifest_sha256: io::sha256_file(inputs.manifest_path)?,
        points_scored: levels.len() - scores.unassigned,
        points_unassigned: scores.unassigned,
        created_at: timestamp_now(),
    };
    let bundle = ReportBundle::assemble(
        inputs.regions,
        &scores.scores,
        &covered,
        &levels,
        &region_of,
        &acquisition::year_histogram(inputs.manifest),
        metadata,
    )?;
    Ok((bundle, scores))
}

pub const DEMO_ORIGIN: (f64, f64) = (-23.55, -46.64);

/// Side of the demo survey square: 9.5 grid steps, giving a 10 x 10 lattice.
pub const DEMO_SIDE_M: f64 = 9.5 * DEFAULT_SPACING_M;

/// The demo survey area split into west and east districts, plus a northern
/// district outside the survey that reports no data.
pub fn demo_regions() -> Result<Vec<RegionPolygon>> {
    let (lat0, lon0) = DEMO_ORIGIN;
    let dlat = DEMO_SIDE_M / METERS_PER_DEGREE;
    let dlon = dlat / lat0.to_radians().cos();
    let split = lon0 + dlon / 2.0;
    Ok(vec![
        RegionPolygon::rectangle("centro-oeste", GeoPoint::new(lat0, lon0)?, GeoPoint::new(lat0 + dlat, split)?)?,
        RegionPolygon::rectangle("centro-leste", GeoPoint::new(lat0, split)?, GeoPoint::new(lat0 + dlat, lon0 + dlon)?)?,
        RegionPolygon::rectangle(
            "norte",
            GeoPoint::new(lat0 + 1.2 * dlat, lon0)?,
            GeoPoint::new(lat0 + 2.0 * dlat, lon0 + dlon)?,
        )?,
    ])
}

/// Configuration of the demo run: simulated provider with a third-party
/// patch, synthetic detector, four views per point.
pub fn demo_config(seed: u64) -> PipelineConfig {
    let (lat0, lon0) = DEMO_ORIGIN;
    let deg = DEMO_SIDE_M / METERS_PER_DEGREE;
    let patch = GeoPoint::new(lat0 + 0.8 * deg, lon0 + 0.8 * deg / lat0.to_radians().cos()).expect("demo patch");
    PipelineConfig {
        grid: GridConfig {
            seed,
            ..GridConfig::default()
        },
        provider: ProviderConfig {
            seed,
            workers: 4,
            external_zones: vec![Zone {
                center: patch,
                radius_m: 150.0,
            }],
            ..ProviderConfig::default()
        },
        detector: DetectorConfig {
            seed,
            mean_regions: 1.5,
            ..DetectorConfig::default()
        },
        ..PipelineConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoOutcome {
    pub points: usize,
    pub acquisition: AcquireStats,
    pub images_detected: usize,
    pub scores: RegionScores,
}

pub const DEMO_PLAN: &str = "plan.jsonl";
pub const DEMO_MANIFEST: &str = "manifest.jsonl";
pub const DEMO_DETECTIONS: &str = "detections";
pub const DEMO_REPORT: &str = "report";

/// Runs every stage of the demo into `out_dir`: plan, manifest, detection
/// files, level and score tables, and the report bundle.
pub fn run_demo(out_dir: &Path, seed: u64) -> Result<DemoOutcome> {
    let config = demo_config(seed);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let regions = demo_regions()?;
    let survey = RegionPolygon::merge("demo", &regions[..2])?;
    let plan = build_plan(&survey, &config.grid.spec())?;
    plan.write_jsonl(&out_dir.join(DEMO_PLAN))?;

    let manifest_path = out_dir.join(DEMO_MANIFEST);
    let client = provider_from_config(&config.provider)?;
    let stats = acquire_to_file(
        &plan,
        config.k,
        client.as_ref(),
        &manifest_path,
        &acquire_options(&config.provider, &manifest_path),
    )?;
    let manifest = Manifest::read_jsonl(&manifest_path)?;

    let det_dir = out_dir.join(DEMO_DETECTIONS);
    let backend = detector_from_config(&config.detector)?;
    let images_detected = run_detection(&manifest, out_dir, backend.as_ref(), &det_dir)?;
    let detections = crate::detection::read_detection_dir(&det_dir)?;

    let (covered, levels) = compute_levels(&plan, &manifest, &detections, config.k, &config.level_options())?;
    let scores = score_by_region(&regions, &covered, &levels)?;
    io::write_atomic(&out_dir.join("levels.csv"), levels_csv(&levels).as_bytes())?;
    io::write_atomic(&out_dir.join("scores.csv"), scores_csv(&scores.scores).as_bytes())?;

    let (bundle, _) = build_report(&ReportInputs {
        regions: &regions,
        plan: &plan,
        manifest: &manifest,
        manifest_path: &manifest_path,
        detections: &detections,
        k: config.k,
        level_options: config.level_options(),
        config_hash: config.hash(),
    })?;
    bundle.write(&out_dir.join(DEMO_REPORT))?;
    Ok(DemoOutcome {
        points: plan.points.len(),
        acquisition: stats,
        images_detected,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_precedence_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        std::fs::write(&file, r#"{"k": 2, "tau": 0.3, "grid": {"spacing_m": 50}}"#).unwrap();
        let c = PipelineConfig::load(Some(&file), &[("tau".into(), parse_override("0.7")), ("mode".into(), parse_override("raw_px"))]).unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(c.tau, 0.7);
        assert_eq!(c.mode, Mode::RawPx);
        assert_eq!(c.grid.spacing_m, 50.0);
        assert_eq!(c.grid.strategy, Strategy::Systematic);
        assert_eq!(PipelineConfig::load(None, &[]).unwrap(), PipelineConfig::default());
        std::fs::write(&file, r#"{"kk": 2}"#).unwrap();
        assert!(matches!(PipelineConfig::load(Some(&file), &[]), Err(Error::Config(_))));
        assert!(PipelineConfig::load(None, &[("grid.spacingm".into(), parse_override("3"))]).is_err());
        assert!(PipelineConfig::load(None, &[("tau".into(), parse_override("2"))]).is_err());
        assert!(matches!(PipelineConfig::load(None, &[("k".into(), parse_override("0"))]), Err(Error::InvalidK)));
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = PipelineConfig {
            out: Some("x".into()),
            ..PipelineConfig::default()
        };
        let b = PipelineConfig {
            out: Some("y".into()),
            ..PipelineConfig::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = PipelineConfig { k: 3, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn demo_has_a_hundred_points_and_drops_third_party_views() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_demo(dir.path(), 1).unwrap();
        assert_eq!(out.points, 100);
        assert_eq!(out.acquisition.views, 400);
        let scored: usize = out.scores.scores.iter().map(|s| s.n).sum();
        assert!(scored < 100 && scored > 80, "{scored}");
        assert_eq!(out.scores.scores.len(), 2);
        assert_eq!(out.scores.unassigned, 0);
    }
}
