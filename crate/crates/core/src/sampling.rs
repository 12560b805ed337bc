//! Survey location sampling: a fixed-spacing lattice, uniform random points,
//! and the coverage filter that drops locations without usable imagery.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{image_id, plan_views, ImageStatus, Manifest, ProviderKind};
use crate::error::{Error, Result};
use crate::geo::{local_degree_steps, point_in_polygon, GeoPoint, RegionPolygon, BOUNDARY_EPS_DEG};
use crate::io;

pub const DEFAULT_SPACING_M: f64 = 102.0;

/// Consecutive rejections allowed per requested random point.
pub const REJECTIONS_PER_POINT: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Systematic,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub strategy: Strategy,
    pub spacing_m: f64,
    /// Lattice origin; the region's bbox min corner when unset.
    pub anchor: Option<GeoPoint>,
    pub n_random: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            strategy: Strategy::Systematic,
            spacing_m: DEFAULT_SPACING_M,
            anchor: None,
            n_random: 0,
            seed: 0,
        }
    }
}

impl GridSpec {
    pub fn systematic(spacing_m: f64) -> Self {
        GridSpec {
            spacing_m,
            ..Default::default()
        }
    }

    pub fn random(n_random: usize, seed: u64) -> Self {
        GridSpec {
            strategy: Strategy::Random,
            n_random,
            seed,
            ..Default::default()
        }
    }

    pub fn with_anchor(mut self, anchor: GeoPoint) -> Self {
        self.anchor = Some(anchor);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub point_id: String,
    #[serde(flatten)]
    pub location: GeoPoint,
}

impl SamplePoint {
    pub fn new(location: GeoPoint) -> Self {
        SamplePoint {
            point_id: point_id(location),
            location,
        }
    }
}

/// Stable identifier from coordinates rounded to 1e-7 degrees.
pub fn point_id(p: GeoPoint) -> String {
    fn fixed7(v: f64) -> String {
        let units = (v * 1e7).round() as i64;
        let sign = if units < 0 { "-" } else { "" };
        let units = units.unsigned_abs();
        format!("{sign}{}.{:07}", units / 10_000_000, units % 10_000_000)
    }
    format!("{}_{}", fixed7(p.lat()), fixed7(p.lon()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub spec: GridSpec,
    pub region_id: String,
    pub points: Vec<SamplePoint>,
}

fn sort_points(points: &mut [SamplePoint]) {
    points.sort_by(|a, b| {
        a.location
            .lat()
            .total_cmp(&b.location.lat())
            .then(a.location.lon().total_cmp(&b.location.lon()))
    });
}

/// Inclusive index range of lattice lines `origin + i * step` within `[lo, hi]`.
fn lattice_range(origin: f64, step: f64, lo: f64, hi: f64) -> std::ops::RangeInclusive<i64> {
    let first = ((lo - BOUNDARY_EPS_DEG - origin) / step).ceil() as i64;
    let last = ((hi + BOUNDARY_EPS_DEG - origin) / step).floor() as i64;
    first..=last
}

/// Axis-aligned lattice over the region with steps frozen at the bbox mid-latitude.
pub fn build_systematic_grid(region: &RegionPolygon, spec: &GridSpec) -> Result<SamplePlan> {
    let bbox = region.bbox();
    let mid = GeoPoint::new(bbox.mid_lat(), bbox.min_lon)?;
    let (dlat, dlon) = local_degree_steps(mid, spec.spacing_m)?;
    let anchor = spec.anchor.unwrap_or_else(|| bbox.min_corner());

    let rows = lattice_range(anchor.lat(), dlat, bbox.min_lat, bbox.max_lat);
    let cols = lattice_range(anchor.lon(), dlon, bbox.min_lon, bbox.max_lon);
    let candidates: Vec<(i64, i64)> = rows
        .flat_map(|i| cols.clone().map(move |j| (i, j)))
        .collect();

    let mut points: Vec<SamplePoint> = candidates
        .par_iter()
        .filter_map(|&(i, j)| {
            let p = GeoPoint::new(anchor.lat() + i as f64 * dlat, anchor.lon() + j as f64 * dlon).ok()?;
            point_in_polygon(p, region).then(|| SamplePoint::new(p))
        })
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyRegion(region.region_id.clone()));
    }
    sort_points(&mut points);
    points.dedup_by(|a, b| a.point_id == b.point_id);
    Ok(SamplePlan {
        spec: GridSpec {
            strategy: Strategy::Systematic,
            anchor: Some(anchor),
            ..spec.clone()
        },
        region_id: region.region_id.clone(),
        points,
    })
}

/// Uniform points over the region by rejection sampling on its bbox.
pub fn sample_random(region: &RegionPolygon, spec: &GridSpec) -> Result<SamplePlan> {
    let bbox = region.bbox();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let limit = REJECTIONS_PER_POINT.saturating_mul(spec.n_random as u64);
    let mut seen = HashSet::with_capacity(spec.n_random);
    let mut points = Vec::with_capacity(spec.n_random);
    let mut rejections = 0u64;
    while points.len() < spec.n_random {
        let lat = rng.gen_range(bbox.min_lat..=bbox.max_lat);
        let lon = rng.gen_range(bbox.min_lon..=bbox.max_lon);
        let p = GeoPoint::new(lat, lon)?;
        if point_in_polygon(p, region) {
            let sp = SamplePoint::new(p);
            if seen.insert(sp.point_id.clone()) {
                points.push(sp);
                rejections = 0;
                continue;
            }
        }
        rejections += 1;
        if rejections >= limit {
            return Err(Error::RejectionOverflow(rejections));
        }
    }
    sort_points(&mut points);
    Ok(SamplePlan {
        spec: GridSpec {
            strategy: Strategy::Random,
            ..spec.clone()
        },
        region_id: region.region_id.clone(),
        points,
    })
}

/// Dispatches on `spec.strategy`.
pub fn build_plan(region: &RegionPolygon, spec: &GridSpec) -> Result<SamplePlan> {
    match spec.strategy {
        Strategy::Systematic => build_systematic_grid(region, spec),
        Strategy::Random => sample_random(region, spec),
    }
}

/// Keeps a point only if every one of its `k` views resolved to first-party imagery.
pub fn coverage_filter(plan: &SamplePlan, manifest: &Manifest, k: usize) -> Result<SamplePlan> {
    let mut kept = Vec::with_capacity(plan.points.len());
    for point in &plan.points {
        let views = plan_views(point, k)?;
        let covered = views.iter().all(|v| {
            manifest
                .get(&image_id(&v.point_id, v.heading_deg))
                .is_some_and(|r| r.status == ImageStatus::Ok && r.provider == ProviderKind::FirstParty)
        });
        if covered {
            kept.push(point.clone());
        }
    }
    Ok(SamplePlan {
        spec: plan.spec.clone(),
        region_id: plan.region_id.clone(),
        points: kept,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanHeader {
    region_id: String,
    strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spacing_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_random: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchor: Option<GeoPoint>,
}

impl SamplePlan {
    /// JSON Lines: a header object followed by one `{point_id, lat, lon}` per point.
    pub fn to_jsonl(&self) -> Result<String> {
        let header = match self.spec.strategy {
            Strategy::Systematic => PlanHeader {
                region_id: self.region_id.clone(),
                strategy: Strategy::Systematic,
                spacing_m: Some(self.spec.spacing_m),
                n_random: None,
                seed: None,
                anchor: self.spec.anchor,
            },
            Strategy::Random => PlanHeader {
                region_id: self.region_id.clone(),
                strategy: Strategy::Random,
                spacing_m: None,
                n_random: Some(self.spec.n_random),
                seed: Some(self.spec.seed),
                anchor: None,
            },
        };
        let mut out = io::to_json_line(&header)?;
        for p in &self.points {
            out.push_str(&io::to_json_line(p)?);
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_jsonl()?.as_bytes())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let lines = io::read_lines(path)?;
        let mut lines = lines.into_iter();
        let (no, first) = lines
            .next()
            .ok_or_else(|| Error::Format(format!("{}: empty plan file", path.display())))?;
        let header: PlanHeader = io::parse_line(path, no, &first)?;
        let spec = GridSpec {
            strategy: header.strategy,
            spacing_m: header.spacing_m.unwrap_or(DEFAULT_SPACING_M),
            anchor: header.anchor,
            n_random: header.n_random.unwrap_or(0),
            seed: header.seed.unwrap_or(0),
        };
        let points = lines
            .map(|(no, line)| io::parse_line::<SamplePoint>(path, no, &line))
            .collect::<Result<Vec<_>>>()?;
        let mut ids = HashSet::with_capacity(points.len());
        for p in &points {
            if !ids.insert(p.point_id.as_str()) {
                return Err(Error::Format(format!(
                    "{}: duplicate point_id {}",
                    path.display(),
                    p.point_id
                )));
            }
        }
        Ok(SamplePlan {
            spec,
            region_id: header.region_id,
            points,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::ImageRecord;
    use crate::geo::{haversine_m, METERS_PER_DEGREE};

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn equator_square(side_m: f64) -> RegionPolygon {
        let d = side_m / METERS_PER_DEGREE;
        RegionPolygon::rectangle("sq", pt(0.0, 0.0), pt(d, d)).unwrap()
    }

    #[test]
    fn point_ids_round_to_1e7() {
        assert_eq!(point_id(pt(-23.55229300, -46.501199)), "-23.5522930_-46.5011990");
        assert_eq!(point_id(pt(-0.00000001, 0.0)), "0.0000000_0.0000000");
        assert_eq!(point_id(pt(1.23456789, 2.0)), "1.2345679_2.0000000");
    }

    #[test]
    fn equator_square_has_eleven_by_eleven_points() {
        // floor(1020 / 102) + 1 = 11 per axis
        let plan = build_systematic_grid(&equator_square(1020.0), &GridSpec::systematic(102.0)).unwrap();
        assert_eq!(plan.points.len(), 121);
        let ids: HashSet<_> = plan.points.iter().map(|p| &p.point_id).collect();
        assert_eq!(ids.len(), 121);
    }

    #[test]
    fn region_smaller_than_a_step_keeps_the_anchor() {
        let plan = build_systematic_grid(&equator_square(50.0), &GridSpec::systematic(102.0)).unwrap();
        assert_eq!(plan.points.len(), 1);
        assert_eq!(plan.points[0].location, pt(0.0, 0.0));
    }

    #[test]
    fn region_without_lattice_points_is_empty() {
        let region = equator_square(50.0);
        let spec = GridSpec::systematic(102.0).with_anchor(pt(-0.0002, -0.0002));
        assert!(matches!(build_systematic_grid(&region, &spec), Err(Error::EmptyRegion(_))));
    }

    #[test]
    fn points_in_a_hole_are_dropped() {
        let step = 102.0 / METERS_PER_DEGREE;
        let d = 10.0 * step;
        let ext = vec![pt(0.0, 0.0), pt(0.0, d), pt(d, d), pt(d, 0.0)];
        // hole edges fall between lattice lines: rows 1..=5, columns 1..=9
        let (lo_lat, hi_lat, lo_lon, hi_lon) = (0.5 * step, 5.5 * step, 0.5 * step, 9.5 * step);
        let hole = vec![pt(lo_lat, lo_lon), pt(lo_lat, hi_lon), pt(hi_lat, hi_lon), pt(hi_lat, lo_lon)];
        let region = RegionPolygon::new("holed", ext, vec![hole]).unwrap();
        let full = RegionPolygon::rectangle("full", pt(0.0, 0.0), pt(d, d)).unwrap();
        let spec = GridSpec::systematic(102.0);
        let all = build_systematic_grid(&full, &spec).unwrap();
        let holed = build_systematic_grid(&region, &spec).unwrap();
        let expected: Vec<_> = all
            .points
            .iter()
            .filter(|p| {
                let (lat, lon) = (p.location.lat(), p.location.lon());
                !(lat > lo_lat && lat < hi_lat && lon > lo_lon && lon < hi_lon)
            })
            .cloned()
            .collect();
        assert_eq!(all.points.len(), 121);
        assert_eq!(holed.points.len(), 121 - 45);
        assert_eq!(holed.points, expected);
    }

    #[test]
    fn lattice_neighbors_sit_one_spacing_apart() {
        let d = 5000.0 / METERS_PER_DEGREE;
        let region = RegionPolygon::rectangle("r", pt(40.0, 10.0), pt(40.0 + d, 10.0 + 1.4 * d)).unwrap();
        let plan = build_systematic_grid(&region, &GridSpec::systematic(102.0)).unwrap();
        let pts = &plan.points;
        for w in pts.windows(2) {
            if w[0].location.lat() == w[1].location.lat() {
                let d = haversine_m(w[0].location, w[1].location);
                assert!((d - 102.0).abs() <= 0.005 * 102.0, "{d}");
            }
        }
    }

    #[test]
    fn shifting_anchor_one_step_reproduces_the_lattice() {
        let region = equator_square(1020.0);
        let base = build_systematic_grid(&region, &GridSpec::systematic(102.0)).unwrap();
        let (dlat, dlon) = local_degree_steps(pt(region.bbox().mid_lat(), 0.0), 102.0).unwrap();
        let shifted = build_systematic_grid(&region, &GridSpec::systematic(102.0).with_anchor(pt(dlat, dlon))).unwrap();
        assert_eq!(base.points.len(), shifted.points.len());
        for (a, b) in base.points.iter().zip(&shifted.points) {
            assert!(haversine_m(a.location, b.location) < 1e-3);
        }
    }

    #[test]
    fn random_sampling_edge_cases() {
        let region = equator_square(1000.0);
        let empty = sample_random(&region, &GridSpec::random(0, 1)).unwrap();
        assert!(empty.points.is_empty());
        let a = sample_random(&region, &GridSpec::random(200, 42)).unwrap();
        let b = sample_random(&region, &GridSpec::random(200, 42)).unwrap();
        assert_eq!(a, b);
        assert!(a.points.iter().all(|p| point_in_polygon(p.location, &region)));
        assert!(a.points.windows(2).all(|w| w[0].location.lat() <= w[1].location.lat()));
    }

    #[test]
    fn random_sampling_fills_quadrants_evenly() {
        let region = RegionPolygon::rectangle("q", pt(0.0, 0.0), pt(0.02, 0.02)).unwrap();
        let plan = sample_random(&region, &GridSpec::random(10_000, 7)).unwrap();
        let mut counts = [0usize; 4];
        for p in &plan.points {
            let q = usize::from(p.location.lat() >= 0.01) * 2 + usize::from(p.location.lon() >= 0.01);
            counts[q] += 1;
        }
        for c in counts {
            assert!((2350..=2650).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn random_sampling_passes_chi_square() {
        let region = RegionPolygon::rectangle("q", pt(-23.6, -46.7), pt(-23.5, -46.6)).unwrap();
        let plan = sample_random(&region, &GridSpec::random(10_000, 2024)).unwrap();
        let mut cells = [0f64; 16];
        for p in &plan.points {
            let r = (((p.location.lat() + 23.6) / 0.1 * 4.0) as usize).min(3);
            let c = (((p.location.lon() + 46.7) / 0.1 * 4.0) as usize).min(3);
            cells[r * 4 + c] += 1.0;
        }
        let expected = 10_000.0 / 16.0;
        let chi2: f64 = cells.iter().map(|o| (o - expected).powi(2) / expected).sum();
        // 15 degrees of freedom, p = 0.001 critical value
        assert!(chi2 < 37.697, "{chi2}");
    }

    #[test]
    fn sliver_region_overflows_rejection_budget() {
        let ring = vec![pt(0.0, 0.0), pt(1.0, 1.0), pt(1.0, 1.0 + 1e-12)];
        let region = RegionPolygon::new("sliver", ring, vec![]).unwrap();
        assert!(matches!(
            sample_random(&region, &GridSpec::random(1, 3)),
            Err(Error::RejectionOverflow(_))
        ));
    }

    fn record(point: &SamplePoint, heading: f64, provider: ProviderKind, status: ImageStatus) -> ImageRecord {
        ImageRecord {
            image_id: image_id(&point.point_id, heading),
            point_id: point.point_id.clone(),
            heading_deg: heading,
            capture_year: Some(2017),
            provider,
            width_px: 640,
            height_px: 640,
            storage_ref: Some("mem://x".into()),
            status,
        }
    }

    #[test]
    fn coverage_filter_mixed_providers() {
        let pts: Vec<SamplePoint> = (0..3).map(|i| SamplePoint::new(pt(i as f64, 0.0))).collect();
        let plan = SamplePlan {
            spec: GridSpec::default(),
            region_id: "r".into(),
            points: pts.clone(),
        };
        let mut m = Manifest::default();
        for h in [0.0, 90.0, 180.0, 270.0] {
            m.append(record(&pts[0], h, ProviderKind::FirstParty, ImageStatus::Ok)).unwrap();
            let kind = if h == 270.0 { ProviderKind::External } else { ProviderKind::FirstParty };
            m.append(record(&pts[1], h, kind, ImageStatus::Ok)).unwrap();
        }
        let out = coverage_filter(&plan, &m, 4).unwrap();
        assert_eq!(out.points, vec![pts[0].clone()]);
        // idempotent and a subset
        assert_eq!(coverage_filter(&out, &m, 4).unwrap(), out);
    }

    #[test]
    fn coverage_filter_extremes() {
        let pts: Vec<SamplePoint> = (0..2).map(|i| SamplePoint::new(pt(i as f64, 1.0))).collect();
        let plan = SamplePlan {
            spec: GridSpec::default(),
            region_id: "r".into(),
            points: pts.clone(),
        };
        let mut all_first = Manifest::default();
        let mut all_ext = Manifest::default();
        for p in &pts {
            for h in [0.0, 90.0, 180.0, 270.0] {
                all_first.append(record(p, h, ProviderKind::FirstParty, ImageStatus::Ok)).unwrap();
                let kind = if h == 0.0 { ProviderKind::External } else { ProviderKind::FirstParty };
                all_ext.append(record(p, h, kind, ImageStatus::Ok)).unwrap();
            }
        }
        assert_eq!(coverage_filter(&plan, &all_first, 4).unwrap(), plan);
        assert!(coverage_filter(&plan, &all_ext, 4).unwrap().points.is_empty());
    }

    #[test]
    fn plan_jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plan.jsonl");
        let plan = build_systematic_grid(&equator_square(300.0), &GridSpec::systematic(102.0)).unwrap();
        plan.write_jsonl(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(header["spacing_m"], 102.0);
        assert_eq!(header["region_id"], "sq");
        let second: serde_json::Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
        assert!(second.get("point_id").is_some() && second.get("lat").is_some() && second.get("lon").is_some());
        assert_eq!(SamplePlan::read_jsonl(&path).unwrap(), plan);

        let random = sample_random(&equator_square(300.0), &GridSpec::random(5, 9)).unwrap();
        random.write_jsonl(&path).unwrap();
        assert_eq!(SamplePlan::read_jsonl(&path).unwrap(), random);
    }
}
