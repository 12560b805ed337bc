//! The full pipeline on a 100-point survey: plan, simulated acquisition,
//! synthetic detection, scoring and the report bundle.
//!
//! `cargo run --example demo_pipeline -- out/` keeps the files; without an
//! argument they go to a temporary directory.

use std::path::Path;

use tagmap::pipeline::{run_demo, DEMO_REPORT};

pub fn run_in(out: &Path) -> tagmap::Result<()> {
    let outcome = run_demo(out, 1)?;
    println!(
        "{} points, {} views ({} ok), {} images scanned",
        outcome.points, outcome.acquisition.views, outcome.acquisition.ok, outcome.images_detected
    );
    for s in &outcome.scores.scores {
        println!("{}: n = {}, mean level {:.5}", s.region_id, s.n, s.mean_level);
    }
    let report = out.join(DEMO_REPORT);
    let mut files: Vec<_> = std::fs::read_dir(&report)
        .map_err(|e| tagmap::Error::Format(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    println!("report bundle in {}: {}", report.display(), files.join(", "));
    Ok(())
}

pub fn run() -> tagmap::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| tagmap::Error::Format(e.to_string()))?;
    run_in(dir.path())
}

#[allow(dead_code)]
fn main() -> tagmap::Result<()> {
    match std::env::args_os().nth(1) {
        Some(out) => run_in(Path::new(&out)),
        None => run(),
    }
}
