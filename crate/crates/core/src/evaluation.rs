//! Detector quality: rasterized IoU, greedy matching and 11-point average precision.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{validate_ring, Bitmask, DetectionSet, PixelRing};
use crate::error::{Error, Result};
use crate::io;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRegion {
    pub image_id: String,
    pub polygon_px: PixelRing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthPolygon {
    polygon: PixelRing,
}

/// On-disk annotation file: a detection set without confidences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthFile {
    image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detector_id: Option<String>,
    regions: Vec<GroundTruthPolygon>,
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthRegion>> {
    let file: GroundTruthFile = io::read_json(path)?;
    file.regions
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            validate_ring(&r.polygon, None)
                .map_err(|m| Error::InvalidDetection(format!("{} truth {i}: {m}", path.display())))?;
            Ok(GroundTruthRegion {
                image_id: file.image_id.clone(),
                polygon_px: r.polygon,
            })
        })
        .collect()
}

pub fn write_ground_truth(path: &Path, image_id: &str, regions: &[PixelRing]) -> Result<()> {
    let file = GroundTruthFile {
        image_id: image_id.to_string(),
        detector_id: None,
        regions: regions.iter().map(|p| GroundTruthPolygon { polygon: p.clone() }).collect(),
    };
    let mut text = serde_json::to_string(&file).map_err(|e| Error::json("ground truth", e))?;
    text.push('\n');
    io::write_atomic(path, text.as_bytes())
}

/// Every `*.json` annotation file in `dir`, keyed by image id.
pub fn read_ground_truth_dir(dir: &Path) -> Result<BTreeMap<String, Vec<GroundTruthRegion>>> {
    let mut out: BTreeMap<String, Vec<GroundTruthRegion>> = BTreeMap::new();
    let listing = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in listing {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    for path in paths {
        let regions = read_ground_truth(&path)?;
        let id = match regions.first() {
            Some(r) => r.image_id.clone(),
            None => io::read_json::<GroundTruthFile>(&path)?.image_id,
        };
        out.entry(id).or_default().extend(regions);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub recall: f64,
    pub precision: f64,
    /// Confidence of the detection that closes this prefix.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct APResult {
    pub ap: f64,
    pub n_gt: usize,
    pub n_det: usize,
    pub iou_threshold: f64,
}

fn extent(rings: &[&[[f64; 2]]]) -> (u32, u32) {
    let (mut w, mut h) = (0.0f64, 0.0f64);
    for p in rings.iter().flat_map(|r| r.iter()) {
        w = w.max(p[0]);
        h = h.max(p[1]);
    }
    (w.ceil() as u32, h.ceil() as u32)
}

fn mask_iou(a: &Bitmask, b: &Bitmask) -> f64 {
    let union = a.union_count(b);
    if union == 0 {
        0.0
    } else {
        a.intersection_count(b) as f64 / union as f64
    }
}

/// Intersection over union of two rasterized polygons; 0 when both are empty.
pub fn iou(a: &[[f64; 2]], b: &[[f64; 2]], dims: Option<(u32, u32)>) -> f64 {
    let (w, h) = dims.unwrap_or_else(|| extent(&[a, b]));
    mask_iou(&Bitmask::from_polygon(a, w, h), &Bitmask::from_polygon(b, w, h))
}

/// Greedy VOC matching for one image. Returns one TP flag per detection, in
/// input order.
///
/// Detections are visited by descending confidence (ties keep input order);
/// each takes its best-IoU unmatched truth, ties to the lowest truth index,
/// and is a TP iff that IoU reaches `iou_thr`.
pub fn match_detections(
    dets: &DetectionSet,
    gts: &[GroundTruthRegion],
    iou_thr: f64,
    dims: Option<(u32, u32)>,
) -> Vec<bool> {
    let (w, h) = dims.unwrap_or_else(|| {
        let rings: Vec<&[[f64; 2]]> = dets
            .regions
            .iter()
            .map(|r| r.polygon_px.as_slice())
            .chain(gts.iter().map(|g| g.polygon_px.as_slice()))
            .collect();
        extent(&rings)
    });
    let gt_masks: Vec<Bitmask> = gts.iter().map(|g| Bitmask::from_polygon(&g.polygon_px, w, h)).collect();
    let mut order: Vec<usize> = (0..dets.regions.len()).collect();
    order.sort_by(|&a, &b| dets.regions[b].confidence.total_cmp(&dets.regions[a].confidence));
    let mut matched = vec![false; gts.len()];
    let mut flags = vec![false; dets.regions.len()];
    for d in order {
        let mask = Bitmask::from_polygon(&dets.regions[d].polygon_px, w, h);
        let mut best: Option<(usize, f64)> = None;
        for (g, gm) in gt_masks.iter().enumerate() {
            if matched[g] {
                continue;
            }
            let v = mask_iou(&mask, gm);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        if let Some((g, v)) = best {
            if v >= iou_thr {
                matched[g] = true;
                flags[d] = true;
            }
        }
    }
    flags
}

/// Cumulative precision and recall over detections pooled from all images,
/// visited by descending confidence (ties keep pooled order).
pub fn pr_sweep(scored: &[(f64, bool)], n_gt: usize) -> Vec<PRPoint> {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0));
    let mut tp = 0usize;
    order
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            tp += usize::from(scored[d].1);
            PRPoint {
                recall: if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 },
                precision: tp as f64 / (i + 1) as f64,
                threshold: scored[d].0,
            }
        })
        .collect()
}

/// 11-point interpolated AP: the mean over recall levels 0, 0.1, ..., 1 of
/// the best precision reached at or beyond that recall (0 when none is).
pub fn voc_ap_11pt(points: &[PRPoint], n_gt: usize, iou_threshold: f64) -> APResult {
    let ap = (0..=10)
        .map(|t| {
            let r = f64::from(t) / 10.0;
            points
                .iter()
                .filter(|p| p.recall >= r)
                .map(|p| p.precision)
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / 11.0;
    APResult {
        ap,
        n_gt,
        n_det: points.len(),
        iou_threshold,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub result: APResult,
    pub pr: Vec<PRPoint>,
}

/// Matches every image and pools the results into one PR curve.
///
/// Images are visited in id order; `dims` supplies raster sizes, falling
/// back to the polygons' extent.
pub fn evaluate(
    detections: &BTreeMap<String, DetectionSet>,
    truth: &BTreeMap<String, Vec<GroundTruthRegion>>,
    dims: &BTreeMap<String, (u32, u32)>,
    iou_thr: f64,
) -> Evaluation {
    let ids: BTreeSet<&String> = detections.keys().chain(truth.keys()).collect();
    let ids: Vec<&String> = ids.into_iter().collect();
    let per_image: Vec<Vec<(f64, bool)>> = ids
        .par_iter()
        .map(|id| {
            let Some(set) = detections.get(*id) else {
                return Vec::new();
            };
            let gts = truth.get(*id).map(Vec::as_slice).unwrap_or(&[]);
            let flags = match_detections(set, gts, iou_thr, dims.get(*id).copied());
            set.regions.iter().zip(flags).map(|(r, f)| (r.confidence, f)).collect()
        })
        .collect();
    let scored: Vec<(f64, bool)> = per_image.into_iter().flatten().collect();
    let n_gt = truth.values().map(Vec::len).sum();
    let pr = pr_sweep(&scored, n_gt);
    Evaluation {
        result: voc_ap_11pt(&pr, n_gt, iou_thr),
        pr,
    }
}

pub fn pr_csv(points: &[PRPoint]) -> String {
    let mut out = String::from("recall,precision,threshold\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.recall, p.precision, p.threshold);
    }
    out
}
