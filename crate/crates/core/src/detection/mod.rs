//! Graffiti-tag detections: region geometry, confidence filtering, on-disk
//! format, and the backends that produce them.

mod backend;
mod contour;
mod raster;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use backend::{DetectorBackend, FileBackend, ImageInput, RemoteBackend, SyntheticBackend};
pub use contour::{trace_outlines, trace_rings};
pub use raster::Bitmask;

use crate::error::{Error, Result};
use crate::io;

pub const GRAFFITI_LABEL: &str = "graffiti-tag";
pub const DEFAULT_TAU: f64 = 0.5;

/// A closed ring of `[x, y]` pixel coordinates; the first vertex is not repeated.
pub type PixelRing = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRegion {
    #[serde(rename = "polygon")]
    pub polygon_px: PixelRing,
    pub confidence: f64,
}

impl DetectionRegion {
    pub fn new(polygon_px: PixelRing, confidence: f64) -> Self {
        DetectionRegion {
            polygon_px,
            confidence,
        }
    }

    pub fn label(&self) -> &'static str {
        GRAFFITI_LABEL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSet {
    pub image_id: String,
    pub detector_id: String,
    pub regions: Vec<DetectionRegion>,
}

impl DetectionSet {
    pub fn empty(image_id: impl Into<String>, detector_id: impl Into<String>) -> Self {
        DetectionSet {
            image_id: image_id.into(),
            detector_id: detector_id.into(),
            regions: Vec::new(),
        }
    }

    /// Checks ring sizes, confidences and, when known, image bounds.
    pub fn validate(&self, dims: Option<(u32, u32)>) -> Result<()> {
        for (i, r) in self.regions.iter().enumerate() {
            validate_ring(&r.polygon_px, dims)
                .map_err(|msg| Error::InvalidDetection(format!("{} region {i}: {msg}", self.image_id)))?;
            if !(0.0..=1.0).contains(&r.confidence) {
                return Err(Error::InvalidDetection(format!(
                    "{} region {i}: confidence {} outside [0, 1]",
                    self.image_id, r.confidence
                )));
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string(self).map_err(|e| Error::json("detection set", e))?;
        text.push('\n');
        io::write_atomic(path, text.as_bytes())
    }
}

pub(crate) fn validate_ring(ring: &[[f64; 2]], dims: Option<(u32, u32)>) -> Result<(), String> {
    if ring.len() < 3 {
        return Err(format!("polygon has {} vertices, need at least 3", ring.len()));
    }
    for p in ring {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err("non-finite vertex".into());
        }
        if let Some((w, h)) = dims {
            if p[0] < 0.0 || p[1] < 0.0 || p[0] > f64::from(w) || p[1] > f64::from(h) {
                return Err(format!("vertex ({}, {}) outside {w}x{h} image", p[0], p[1]));
            }
        }
    }
    Ok(())
}

/// Shoelace area, independent of winding; degenerate rings give 0.
pub fn polygon_area_px(ring: &[[f64; 2]]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    contour::signed_area(ring).abs()
}

/// Area covered by the union of the regions, rasterized at 1 px.
pub fn union_area_px(regions: &[DetectionRegion], dims: Option<(u32, u32)>) -> u64 {
    let rings: Vec<&[[f64; 2]]> = regions.iter().map(|r| r.polygon_px.as_slice()).collect();
    union_area_of_rings(&rings, dims)
}

/// Union area of bare rings. Without image dimensions the raster spans the
/// rings' extent.
pub fn union_area_of_rings(rings: &[&[[f64; 2]]], dims: Option<(u32, u32)>) -> u64 {
    if rings.is_empty() {
        return 0;
    }
    let (w, h) = dims.unwrap_or_else(|| {
        let (mut mx, mut my) = (0.0f64, 0.0f64);
        for p in rings.iter().flat_map(|r| r.iter()) {
            mx = mx.max(p[0]);
            my = my.max(p[1]);
        }
        (mx.ceil() as u32, my.ceil() as u32)
    });
    let mut mask = Bitmask::new(w, h);
    for r in rings {
        mask.fill_polygon(r);
    }
    mask.count_ones()
}

/// Regions with confidence at least `tau`, in their original order.
pub fn filter_by_confidence(set: &DetectionSet, tau: f64) -> DetectionSet {
    DetectionSet {
        image_id: set.image_id.clone(),
        detector_id: set.detector_id.clone(),
        regions: set.regions.iter().filter(|r| r.confidence >= tau).cloned().collect(),
    }
}

/// Outlines of a binary mask as detection regions of one confidence.
pub fn regions_from_mask(mask: &Bitmask, confidence: f64) -> Vec<DetectionRegion> {
    trace_outlines(mask)
        .into_iter()
        .map(|ring| DetectionRegion::new(ring, confidence))
        .collect()
}

pub fn detection_path(dir: &Path, image_id: &str) -> std::path::PathBuf {
    dir.join(format!("{image_id}.json"))
}

/// Every `*.json` detection file in `dir`, keyed by image id.
pub fn read_detection_dir(dir: &Path) -> Result<BTreeMap<String, DetectionSet>> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return Ok(out);
    }
    let listing = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in listing {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let set = DetectionSet::read(&path)?;
            out.insert(set.image_id.clone(), set);
        }
    }
    Ok(out)
}
