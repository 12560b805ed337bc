use std::path::{Path, PathBuf};
use std::time::Duration;

use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{detection_path, polygon_area_px, DetectionRegion, DetectionSet, PixelRing};
use crate::acquisition::{resolve_storage, ImageRecord};
use crate::error::{Error, Result};

/// One image handed to a detector.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageInput {
    pub image_id: String,
    /// Local file holding the payload, when there is one.
    pub path: Option<PathBuf>,
    pub width_px: u32,
    pub height_px: u32,
}

impl ImageInput {
    pub fn from_record(record: &ImageRecord, manifest_dir: &Path) -> Self {
        ImageInput {
            image_id: record.image_id.clone(),
            path: record
                .storage_ref
                .as_deref()
                .and_then(|s| resolve_storage(manifest_dir, s)),
            width_px: record.width_px,
            height_px: record.height_px,
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width_px, self.height_px)
    }
}

/// A graffiti segmentation source. Implementations must tolerate
/// concurrent calls on distinct images.
pub trait DetectorBackend: Send + Sync {
    fn detector_id(&self) -> &str;

    fn detect(&self, image: &ImageInput) -> Result<DetectionSet>;
}

/// Reads precomputed `<image_id>.json` files; a missing file means no detections.
#[derive(Debug, Clone)]
pub struct FileBackend {
    dir: PathBuf,
}

impl FileBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FileBackend { dir: dir.into() }
    }
}

impl DetectorBackend for FileBackend {
    fn detector_id(&self) -> &str {
        "file"
    }

    fn detect(&self, image: &ImageInput) -> Result<DetectionSet> {
        let path = detection_path(&self.dir, &image.image_id);
        if !path.exists() {
            return Ok(DetectionSet::empty(&image.image_id, self.detector_id()));
        }
        let set = DetectionSet::read(&path)?;
        if set.image_id != image.image_id {
            return Err(Error::InvalidDetection(format!(
                "{} holds detections for {}",
                path.display(),
                set.image_id
            )));
        }
        set.validate(Some(image.dims()))?;
        Ok(set)
    }
}

#[derive(Serialize)]
struct DetectRequest<'a> {
    image: &'a str,
    width: u32,
    height: u32,
}

/// Client for a detector service speaking `POST /detect`.
///
/// The request carries the base64 image and its dimensions; the response
/// is a detection set. The service cannot know our image ids, so the
/// returned set is re-keyed to the requested image.
pub struct RemoteBackend {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteBackend {
    /// `base_url` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base_url: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        RemoteBackend {
            endpoint: format!("{}/detect", base_url.trim_end_matches('/')),
            agent,
        }
    }
}

impl DetectorBackend for RemoteBackend {
    fn detector_id(&self) -> &str {
        "remote"
    }

    fn detect(&self, image: &ImageInput) -> Result<DetectionSet> {
        let path = image
            .path
            .as_ref()
            .ok_or_else(|| Error::Backend(format!("{} has no stored image payload", image.image_id)))?;
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
        let body = DetectRequest {
            image: &encoded,
            width: image.width_px,
            height: image.height_px,
        };
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| Error::Backend(format!("{}: {e}", self.endpoint)))?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(Error::Backend(format!("{} returned HTTP {status}", self.endpoint)));
        }
        let mut set: DetectionSet = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::Backend(format!("malformed response from {}: {e}", self.endpoint)))?;
        set.image_id = image.image_id.clone();
        set.validate(Some(image.dims()))?;
        Ok(set)
    }
}

/// Seeded generator of plausible tag regions, for tests and demos.
///
/// The same seed and image id always give the same regions, and
/// [`SyntheticBackend::ground_truth`] returns exactly the generated outlines.
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    seed: u64,
    mean_regions: f64,
}

const SYNTHETIC_MAX_REGIONS: u32 = 6;

impl SyntheticBackend {
    pub fn new(seed: u64) -> Self {
        SyntheticBackend {
            seed,
            mean_regions: 1.0,
        }
    }

    /// Expected regions per image, clamped to `[0, 6]`.
    pub fn with_mean_regions(mut self, mean: f64) -> Self {
        self.mean_regions = mean.clamp(0.0, f64::from(SYNTHETIC_MAX_REGIONS));
        self
    }

    fn rng_for(&self, image_id: &str) -> ChaCha8Rng {
        let digest = Sha256::new()
            .chain_update(self.seed.to_le_bytes())
            .chain_update(image_id.as_bytes())
            .finalize();
        ChaCha8Rng::from_seed(digest[..32].try_into().expect("32-byte digest"))
    }

    fn generate(&self, image_id: &str, w: u32, h: u32) -> Vec<DetectionRegion> {
        let mut rng = self.rng_for(image_id);
        let p = self.mean_regions / f64::from(SYNTHETIC_MAX_REGIONS);
        let count = (0..SYNTHETIC_MAX_REGIONS).filter(|_| rng.gen_bool(p)).count();
        let (wf, hf) = (f64::from(w), f64::from(h));
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let cx = rng.gen_range(0.0..wf);
            let cy = rng.gen_range(0.0..hf);
            let sx = rng.gen_range(4.0..(wf / 6.0).max(5.0));
            let sy = rng.gen_range(3.0..(hf / 8.0).max(4.0));
            let ring: PixelRing = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
                .iter()
                .map(|&(ux, uy)| {
                    let jx = rng.gen_range(-0.3..0.3);
                    let jy = rng.gen_range(-0.3..0.3);
                    let x = (cx + (ux + jx) * sx).clamp(0.0, wf).round();
                    let y = (cy + (uy + jy) * sy).clamp(0.0, hf).round();
                    [x, y]
                })
                .collect();
            let confidence = (rng.gen_range(0.05..1.0f64) * 1000.0).round() / 1000.0;
            if polygon_area_px(&ring) >= 16.0 {
                out.push(DetectionRegion::new(ring, confidence));
            }
        }
        out
    }

    /// The outlines this backend reports for `image`, without confidences.
    pub fn ground_truth(&self, image: &ImageInput) -> Vec<PixelRing> {
        self.generate(&image.image_id, image.width_px, image.height_px)
            .into_iter()
            .map(|r| r.polygon_px)
            .collect()
    }
}

impl DetectorBackend for SyntheticBackend {
    fn detector_id(&self) -> &str {
        "synthetic"
    }

    fn detect(&self, image: &ImageInput) -> Result<DetectionSet> {
        Ok(DetectionSet {
            image_id: image.image_id.clone(),
            detector_id: self.detector_id().into(),
            regions: self.generate(&image.image_id, image.width_px, image.height_px),
        })
    }
}
