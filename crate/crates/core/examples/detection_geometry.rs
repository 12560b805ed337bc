//! Region areas, rasterized unions, confidence filtering and mask outlines.

use tagmap::detection::{
    filter_by_confidence, polygon_area_px, regions_from_mask, union_area_px, Bitmask, DetectionRegion, DetectionSet,
};
use tagmap::evaluation::iou;

fn square(x: f64, y: f64, side: f64, confidence: f64) -> DetectionRegion {
    DetectionRegion::new(vec![[x, y], [x + side, y], [x + side, y + side], [x, y + side]], confidence)
}

pub fn run() -> tagmap::Result<()> {
    let dims = Some((640, 480));
    let set = DetectionSet {
        image_id: "demo".into(),
        detector_id: "example".into(),
        regions: vec![square(100.0, 100.0, 100.0, 0.92), square(150.0, 100.0, 100.0, 0.71), square(400.0, 300.0, 40.0, 0.31)],
    };
    set.validate(dims)?;

    for r in &set.regions {
        println!("{} area {} px², confidence {}", r.label(), polygon_area_px(&r.polygon_px), r.confidence);
    }
    let raw: f64 = set.regions.iter().map(|r| polygon_area_px(&r.polygon_px)).sum();
    println!("raw sum {raw} px², union {} px²", union_area_px(&set.regions, dims));

    let kept = filter_by_confidence(&set, 0.5);
    println!("tau 0.5 keeps {} regions, union {} px²", kept.regions.len(), union_area_px(&kept.regions, dims));
    println!("IoU of the overlapping pair: {:.4}", iou(&set.regions[0].polygon_px, &set.regions[1].polygon_px, dims));

    // A filled mask traces back to a single outline.
    let mut mask = Bitmask::new(64, 64);
    mask.fill_polygon(&[[8.0, 8.0], [56.0, 8.0], [56.0, 56.0], [8.0, 56.0]]);
    let traced = regions_from_mask(&mask, 0.8);
    println!("mask of {} px traced to {} outline(s)", mask.count_ones(), traced.len());
    println!("{}", serde_json::to_string(&kept).expect("serializable"));
    Ok(())
}

#[allow(dead_code)]
fn main() -> tagmap::Result<()> {
    run()
}
