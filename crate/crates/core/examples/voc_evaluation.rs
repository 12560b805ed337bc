//! 11-point average precision of a perfect and a degraded detector.

use std::collections::BTreeMap;

use tagmap::detection::{DetectionRegion, DetectionSet, DetectorBackend, ImageInput, SyntheticBackend};
use tagmap::evaluation::{evaluate, pr_csv, GroundTruthRegion};

pub fn run() -> tagmap::Result<()> {
    let backend = SyntheticBackend::new(5).with_mean_regions(2.0);
    let mut perfect = BTreeMap::new();
    let mut degraded = BTreeMap::new();
    let mut truth = BTreeMap::new();
    let mut dims = BTreeMap::new();
    for i in 0..8 {
        let input = ImageInput { image_id: format!("img{i:02}"), path: None, width_px: 640, height_px: 640 };
        let set = backend.detect(&input)?;
        truth.insert(
            input.image_id.clone(),
            backend
                .ground_truth(&input)
                .into_iter()
                .map(|polygon_px| GroundTruthRegion { image_id: input.image_id.clone(), polygon_px })
                .collect::<Vec<_>>(),
        );
        // Drop every other region and add a confident false alarm.
        let mut worse: Vec<DetectionRegion> = set.regions.iter().step_by(2).cloned().collect();
        worse.push(DetectionRegion::new(vec![[600.0, 600.0], [639.0, 600.0], [639.0, 639.0]], 0.99));
        degraded.insert(input.image_id.clone(), DetectionSet { regions: worse, ..set.clone() });
        perfect.insert(input.image_id.clone(), set);
        dims.insert(input.image_id.clone(), (640, 640));
    }

    let best = evaluate(&perfect, &truth, &dims, 0.5);
    println!("perfect detector: AP {} over {} truths", best.result.ap, best.result.n_gt);
    let worse = evaluate(&degraded, &truth, &dims, 0.5);
    println!("degraded detector: AP {:.4} with {} detections", worse.result.ap, worse.result.n_det);
    print!("{}", pr_csv(&worse.pr[worse.pr.len().saturating_sub(5)..]));
    Ok(())
}

#[allow(dead_code)]
fn main() -> tagmap::Result<()> {
    run()
}
