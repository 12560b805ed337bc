//! `tagmap` command line: one subcommand per pipeline stage.
//!
//! Exit status is 0 on success, 1 for usage and validation errors and 2 for
//! runtime failures (I/O, provider credentials, detector service).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::acquisition::{year_histogram, Manifest};
use crate::detection::read_detection_dir;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, pr_csv, read_ground_truth_dir};
use crate::geo::{load_regions, RegionPolygon};
use crate::io;
use crate::metrics::{levels_csv, region_score, score_by_region, scores_csv};
use crate::pipeline::{
    acquire_options, acquire_to_file, build_report, compute_levels, detector_from_config, manifest_dir,
    parse_override, provider_from_config, run_detection, PipelineConfig, ReportInputs,
};
use crate::report::error_chart_svg;
use crate::sampling::{build_plan, SamplePlan, Strategy};
use crate::survey_sim::{bias_variance_report, report_csv, DensityField, EstimatorConfig, Simulation};

#[derive(Parser, Debug)]
#[command(name = "tagmap", version, about = "Graffiti-level mapping from street-level imagery")]
struct Cli {
    /// JSON configuration file; flags and --set override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. --set provider.workers=4.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_key_value)]
    set: Vec<(String, String)>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

fn parse_key_value(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    if k.is_empty() {
        return Err(format!("empty key in {s:?}"));
    }
    Ok((k.to_string(), v.to_string()))
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a systematic sample plan over a region.
    Grid(GridArgs),
    /// Build a uniform random sample plan over a region.
    Sample(SampleArgs),
    /// Fetch k views per plan point into a manifest.
    Acquire(AcquireArgs),
    /// Run a detector over the manifest's images.
    Detect(DetectArgs),
    /// Compute location levels and region scores.
    Score(ScoreArgs),
    /// Measure detections against ground truth with 11-point AP.
    Eval(EvalArgs),
    /// Compare sampling strategies on a synthetic density field.
    Simulate(SimulateArgs),
    /// Write the GeoJSON, CSV, SVG and metadata report bundle.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Region GeoJSON; several polygons are surveyed as one area.
    #[arg(long)]
    region: Option<PathBuf>,
    #[arg(long)]
    spacing_m: Option<f64>,
    #[arg(long, requires = "anchor_lon")]
    anchor_lat: Option<f64>,
    #[arg(long, requires = "anchor_lat")]
    anchor_lon: Option<f64>,
    /// Plan file to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    region: Option<PathBuf>,
    /// Number of points.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Plan file to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AcquireArgs {
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Manifest to create or extend.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Views per point.
    #[arg(long)]
    k: Option<usize>,
    /// simulated, directory or http.
    #[arg(long)]
    provider: Option<String>,
    #[arg(long)]
    provider_dir: Option<PathBuf>,
    #[arg(long)]
    provider_url: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Requests per second.
    #[arg(long)]
    rate: Option<f64>,
    /// Keep image files next to the manifest.
    #[arg(long)]
    store_images: bool,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory for the detection files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// synthetic, file or remote.
    #[arg(long)]
    detector: Option<String>,
    #[arg(long)]
    detector_dir: Option<PathBuf>,
    #[arg(long)]
    detector_url: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mean_regions: Option<f64>,
}

#[derive(Args, Debug)]
struct LevelArgs {
    /// fraction or raw_px.
    #[arg(long)]
    mode: Option<String>,
    /// union or raw_sum.
    #[arg(long)]
    dedup: Option<String>,
    /// Minimum detection confidence.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Directory of detection files; missing files mean no detections.
    #[arg(long)]
    detections: Option<PathBuf>,
    /// District GeoJSON; the whole plan is one region when omitted.
    #[arg(long)]
    region: Option<PathBuf>,
    #[command(flatten)]
    level: LevelArgs,
    /// Directory for levels.csv and scores.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    detections: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Manifest supplying image sizes.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    iou_threshold: Option<f64>,
    /// Directory for pr.csv and ap.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    region: Option<PathBuf>,
    /// Density field JSON; a seeded random field otherwise.
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long)]
    bumps: Option<usize>,
    #[arg(long)]
    field_seed: Option<u64>,
    /// Comma-separated systematic spacings in meters.
    #[arg(long, value_delimiter = ',')]
    spacings_m: Option<Vec<f64>>,
    /// Comma-separated random sample sizes.
    #[arg(long, value_delimiter = ',')]
    sample_sizes: Option<Vec<usize>>,
    /// Seeds per configuration.
    #[arg(long)]
    runs: Option<usize>,
    /// Directory for bias_variance.csv and error_chart.svg.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// District GeoJSON.
    #[arg(long)]
    region: Option<PathBuf>,
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    detections: Option<PathBuf>,
    #[command(flatten)]
    level: LevelArgs,
    /// Bundle directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flag values as configuration overrides.
#[derive(Default)]
struct Overrides(Vec<(String, Value)>);

impl Overrides {
    fn put<T: serde::Serialize>(&mut self, key: &str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key.to_string(), json!(v)));
        }
        self
    }

    fn level(&mut self, a: &LevelArgs) -> &mut Self {
        self.put("mode", a.mode.as_ref())
            .put("dedup", a.dedup.as_ref())
            .put("tau", a.tau)
            .put("k", a.k)
    }
}

fn flag_overrides(command: &Command) -> Vec<(String, Value)> {
    let mut o = Overrides::default();
    match command {
        Command::Grid(a) => {
            o.put("region", a.region.as_ref())
                .put("grid.strategy", Some("systematic"))
                .put("grid.spacing_m", a.spacing_m)
                .put("out", a.out.as_ref());
            if let (Some(lat), Some(lon)) = (a.anchor_lat, a.anchor_lon) {
                o.put("grid.anchor", Some(json!({"lat": lat, "lon": lon})));
            }
        }
        Command::Sample(a) => {
            o.put("region", a.region.as_ref())
                .put("grid.strategy", Some("random"))
                .put("grid.n_random", a.n)
                .put("grid.seed", a.seed)
                .put("out", a.out.as_ref());
        }
        Command::Acquire(a) => {
            o.put("plan", a.plan.as_ref())
                .put("manifest", a.manifest.as_ref())
                .put("k", a.k)
                .put("provider.kind", a.provider.as_ref())
                .put("provider.dir", a.provider_dir.as_ref())
                .put("provider.url", a.provider_url.as_ref())
                .put("provider.seed", a.seed)
                .put("provider.workers", a.workers)
                .put("provider.rate_per_sec", a.rate)
                .put("provider.store_images", a.store_images.then_some(true));
        }
        Command::Detect(a) => {
            o.put("manifest", a.manifest.as_ref())
                .put("detections", a.out.as_ref())
                .put("detector.kind", a.detector.as_ref())
                .put("detector.dir", a.detector_dir.as_ref())
                .put("detector.url", a.detector_url.as_ref())
                .put("detector.seed", a.seed)
                .put("detector.mean_regions", a.mean_regions);
        }
        Command::Score(a) => {
            o.put("plan", a.plan.as_ref())
                .put("manifest", a.manifest.as_ref())
                .put("detections", a.detections.as_ref())
                .put("region", a.region.as_ref())
                .put("out", a.out.as_ref())
                .level(&a.level);
        }
        Command::Eval(a) => {
            o.put("detections", a.detections.as_ref())
                .put("ground_truth", a.ground_truth.as_ref())
                .put("manifest", a.manifest.as_ref())
                .put("iou_threshold", a.iou_threshold)
                .put("out", a.out.as_ref());
        }
        Command::Simulate(a) => {
            o.put("region", a.region.as_ref())
                .put("simulation.field", a.field.as_ref())
                .put("simulation.bumps", a.bumps)
                .put("simulation.field_seed", a.field_seed)
                .put("simulation.spacings_m", a.spacings_m.as_ref())
                .put("simulation.sample_sizes", a.sample_sizes.as_ref())
                .put("simulation.runs", a.runs)
                .put("out", a.out.as_ref());
        }
        Command::Report(a) => {
            o.put("region", a.region.as_ref())
                .put("plan", a.plan.as_ref())
                .put("manifest", a.manifest.as_ref())
                .put("detections", a.detections.as_ref())
                .put("out", a.out.as_ref())
                .level(&a.level);
        }
    }
    o.0
}

/// Entry point for the binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Parses `args` (program name first), runs the subcommand and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let mut overrides: Vec<(String, Value)> = cli.set.iter().map(|(k, v)| (k.clone(), parse_override(v))).collect();
    overrides.extend(flag_overrides(&cli.command));
    let config = PipelineConfig::load(cli.config.as_deref(), &overrides)?;
    match &cli.command {
        Command::Grid(_) | Command::Sample(_) => cmd_plan(&config),
        Command::Acquire(_) => cmd_acquire(&config),
        Command::Detect(_) => cmd_detect(&config),
        Command::Score(_) => cmd_score(&config),
        Command::Eval(_) => cmd_eval(&config),
        Command::Simulate(_) => cmd_simulate(&config),
        Command::Report(_) => cmd_report(&config),
    }
}

/// All polygons of a region file merged into one survey area.
fn survey_area(path: &Path) -> Result<RegionPolygon> {
    let regions = load_regions(path)?;
    if regions.len() == 1 {
        return Ok(regions.into_iter().next().expect("one region"));
    }
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "region".into());
    RegionPolygon::merge(id, &regions)
}

fn cmd_plan(c: &PipelineConfig) -> Result<()> {
    let region = survey_area(c.require(&c.region, "region")?)?;
    let out = c.require(&c.out, "out")?;
    let plan = build_plan(&region, &c.grid.spec())?;
    plan.write_jsonl(out)?;
    println!("{} points for {} written to {}", plan.points.len(), plan.region_id, out.display());
    Ok(())
}

fn cmd_acquire(c: &PipelineConfig) -> Result<()> {
    let plan = SamplePlan::read_jsonl(c.require(&c.plan, "plan")?)?;
    let manifest_path = c.require(&c.manifest, "manifest")?;
    let client = provider_from_config(&c.provider)?;
    let stats = acquire_to_file(&plan, c.k, client.as_ref(), manifest_path, &acquire_options(&c.provider, manifest_path))?;
    println!(
        "views {} cached {} ok {} unmapped {} failed {}",
        stats.views, stats.cached, stats.ok, stats.unmapped, stats.failed
    );
    Ok(())
}

fn cmd_detect(c: &PipelineConfig) -> Result<()> {
    let manifest_path = c.require(&c.manifest, "manifest")?;
    let out = c.require(&c.detections, "detections")?;
    let manifest = Manifest::read_jsonl(manifest_path)?;
    let backend = detector_from_config(&c.detector)?;
    let n = run_detection(&manifest, &manifest_dir(manifest_path), backend.as_ref(), out)?;
    println!("{n} images processed by {} into {}", backend.detector_id(), out.display());
    Ok(())
}

fn cmd_score(c: &PipelineConfig) -> Result<()> {
    let plan = SamplePlan::read_jsonl(c.require(&c.plan, "plan")?)?;
    let manifest = Manifest::read_jsonl(c.require(&c.manifest, "manifest")?)?;
    let detections = read_detection_dir(c.require(&c.detections, "detections")?)?;
    let out = c.require(&c.out, "out")?;
    let (covered, levels) = compute_levels(&plan, &manifest, &detections, c.k, &c.level_options())?;
    let scores = match &c.region {
        Some(path) => score_by_region(&load_regions(path)?, &covered, &levels)?.scores,
        None if levels.is_empty() => Vec::new(),
        None => vec![region_score(&plan.region_id, &levels)?],
    };
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    io::write_atomic(&out.join("levels.csv"), levels_csv(&levels).as_bytes())?;
    io::write_atomic(&out.join("scores.csv"), scores_csv(&scores).as_bytes())?;
    println!("{} of {} points covered, {} regions scored", levels.len(), plan.points.len(), scores.len());
    Ok(())
}

fn cmd_eval(c: &PipelineConfig) -> Result<()> {
    let detections = read_detection_dir(c.require(&c.detections, "detections")?)?;
    let truth = read_ground_truth_dir(c.require(&c.ground_truth, "ground_truth")?)?;
    let out = c.require(&c.out, "out")?;
    let dims: BTreeMap<String, (u32, u32)> = match &c.manifest {
        Some(p) => Manifest::read_jsonl(p)?
            .records()
            .iter()
            .filter(|r| r.width_px > 0 && r.height_px > 0)
            .map(|r| (r.image_id.clone(), (r.width_px, r.height_px)))
            .collect(),
        None => BTreeMap::new(),
    };
    let e = evaluate(&detections, &truth, &dims, c.iou_threshold);
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    io::write_atomic(&out.join("pr.csv"), pr_csv(&e.pr).as_bytes())?;
    let mut ap = serde_json::to_string_pretty(&e.result).map_err(|err| Error::json("ap result", err))?;
    ap.push('\n');
    io::write_atomic(&out.join("ap.json"), ap.as_bytes())?;
    println!("AP {:.4} over {} detections and {} truths", e.result.ap, e.result.n_det, e.result.n_gt);
    Ok(())
}

fn cmd_simulate(c: &PipelineConfig) -> Result<()> {
    let region = survey_area(c.require(&c.region, "region")?)?;
    let out = c.require(&c.out, "out")?;
    let s = &c.simulation;
    let field = match &s.field {
        Some(p) => io::read_json::<DensityField>(p)?,
        None => DensityField::random(s.field_seed, &region, s.bumps),
    };
    let sim = Simulation::new(field, region)?;
    let configs: Vec<EstimatorConfig> = s
        .spacings_m
        .iter()
        .map(|&param| EstimatorConfig { strategy: Strategy::Systematic, param })
        .chain(s.sample_sizes.iter().map(|&n| EstimatorConfig { strategy: Strategy::Random, param: n as f64 }))
        .collect();
    let seeds: Vec<u64> = (0..s.runs as u64).collect();
    let rows = bias_variance_report(&sim, &configs, &seeds)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    io::write_atomic(&out.join("bias_variance.csv"), report_csv(&rows).as_bytes())?;
    io::write_atomic(&out.join("error_chart.svg"), error_chart_svg(&rows).as_bytes())?;
    println!("true mean {} from {} configurations x {} runs", sim.true_mean, rows.len(), s.runs);
    Ok(())
}

fn cmd_report(c: &PipelineConfig) -> Result<()> {
    let regions = load_regions(c.require(&c.region, "region")?)?;
    let plan = SamplePlan::read_jsonl(c.require(&c.plan, "plan")?)?;
    let manifest_path = c.require(&c.manifest, "manifest")?;
    let manifest = Manifest::read_jsonl(manifest_path)?;
    let detections = read_detection_dir(c.require(&c.detections, "detections")?)?;
    let out = c.require(&c.out, "out")?;
    let (bundle, scores) = build_report(&ReportInputs {
        regions: &regions,
        plan: &plan,
        manifest: &manifest,
        manifest_path,
        detections: &detections,
        k: c.k,
        level_options: c.level_options(),
        config_hash: c.hash(),
    })?;
    bundle.write(out)?;
    let years = year_histogram(&manifest);
    println!(
        "{} regions scored, {} unassigned points, {} images dated; bundle in {}",
        scores.scores.len(),
        scores.unassigned,
        years.total(),
        out.display()
    );
    Ok(())
}
