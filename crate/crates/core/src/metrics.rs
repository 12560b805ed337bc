//! Graffiti level per location and per region, plus the capture-year histogram.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detection::{filter_by_confidence, polygon_area_px, union_area_px, DetectionSet, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::geo::{on_region_boundary, point_in_polygon, RegionPolygon};
use crate::io::csv_field;
use crate::sampling::SamplePlan;

/// Units of a location level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Tagged area divided by the view's pixel count.
    #[default]
    Fraction,
    RawPx,
}

/// How overlapping regions within one view are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dedup {
    /// Pixels covered by any kept region.
    #[default]
    Union,
    /// Sum of polygon areas; overlaps count twice, so a view's fraction can exceed 1.
    RawSum,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fraction" => Ok(Mode::Fraction),
            "raw_px" => Ok(Mode::RawPx),
            _ => Err(Error::Config(format!("unknown mode {s:?}, expected fraction or raw_px"))),
        }
    }
}

impl FromStr for Dedup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(Dedup::Union),
            "raw_sum" => Ok(Dedup::RawSum),
            _ => Err(Error::Config(format!("unknown dedup {s:?}, expected union or raw_sum"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelOptions {
    pub mode: Mode,
    pub dedup: Dedup,
    pub tau: f64,
}

impl Default for LevelOptions {
    fn default() -> Self {
        LevelOptions {
            mode: Mode::Fraction,
            dedup: Dedup::Union,
            tau: DEFAULT_TAU,
        }
    }
}

/// Detections for one view with the view's image size, when known.
#[derive(Debug, Clone, Copy)]
pub struct ViewDetections<'a> {
    pub set: &'a DetectionSet,
    pub dims: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationLevel {
    pub point_id: String,
    pub level: f64,
    pub views_counted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub region_id: String,
    pub n: usize,
    pub mean_level: f64,
}

/// Tagged area of one view in the units of `opts.mode`.
pub fn view_area(view: &ViewDetections<'_>, opts: &LevelOptions) -> Result<f64> {
    let kept = filter_by_confidence(view.set, opts.tau);
    let area = match opts.dedup {
        Dedup::Union => union_area_px(&kept.regions, view.dims) as f64,
        Dedup::RawSum => kept.regions.iter().map(|r| polygon_area_px(&r.polygon_px)).sum(),
    };
    match opts.mode {
        Mode::RawPx => Ok(area),
        Mode::Fraction => match view.dims {
            Some((w, h)) if w > 0 && h > 0 => Ok(area / (f64::from(w) * f64::from(h))),
            _ => Err(Error::MissingDims(view.set.image_id.clone())),
        },
    }
}

/// Sum of the per-view tagged areas at one location.
pub fn location_level(point_id: &str, views: &[ViewDetections<'_>], opts: &LevelOptions) -> Result<LocationLevel> {
    let mut level = 0.0;
    for v in views {
        level += view_area(v, opts)?;
    }
    Ok(LocationLevel {
        point_id: point_id.to_string(),
        level,
        views_counted: views.len(),
    })
}

/// Order-independent sum: values are added in ascending order.
fn stable_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Mean level over a region's locations.
pub fn region_score(region_id: &str, levels: &[LocationLevel]) -> Result<RegionScore> {
    if levels.is_empty() {
        return Err(Error::EmptyRegion(region_id.to_string()));
    }
    let total = stable_sum(levels.iter().map(|l| l.level));
    Ok(RegionScore {
        region_id: region_id.to_string(),
        n: levels.len(),
        mean_level: total / levels.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionScores {
    /// One score per region holding at least one location, in input region order.
    pub scores: Vec<RegionScore>,
    /// Locations outside every region.
    pub unassigned: usize,
}

/// Region a point belongs to: the unique region whose interior holds it,
/// or the first listed region whose boundary it lies on.
pub fn assign_region(
    point_id: &str,
    location: crate::geo::GeoPoint,
    regions: &[RegionPolygon],
) -> Result<Option<usize>> {
    let mut interior: Option<usize> = None;
    let mut boundary: Option<usize> = None;
    for (i, r) in regions.iter().enumerate() {
        if !point_in_polygon(location, r) {
            continue;
        }
        if on_region_boundary(location, r) {
            boundary.get_or_insert(i);
        } else if let Some(first) = interior {
            return Err(Error::OverlappingRegions {
                point_id: point_id.to_string(),
                first: regions[first].region_id.clone(),
                second: r.region_id.clone(),
            });
        } else {
            interior = Some(i);
        }
    }
    Ok(interior.or(boundary))
}

/// Groups levels by containing region and scores each group.
pub fn score_by_region(
    regions: &[RegionPolygon],
    plan: &SamplePlan,
    levels: &[LocationLevel],
) -> Result<RegionScores> {
    let locations: HashMap<&str, _> = plan.points.iter().map(|p| (p.point_id.as_str(), p.location)).collect();
    let mut groups: Vec<Vec<LocationLevel>> = vec![Vec::new(); regions.len()];
    let mut unassigned = 0;
    for l in levels {
        let loc = *locations
            .get(l.point_id.as_str())
            .ok_or_else(|| Error::Format(format!("level for {} has no plan point", l.point_id)))?;
        match assign_region(&l.point_id, loc, regions)? {
            Some(i) => groups[i].push(l.clone()),
            None => unassigned += 1,
        }
    }
    if unassigned > 0 {
        log::warn!("{unassigned} locations fall outside every region and were dropped");
    }
    let scores = regions
        .iter()
        .zip(&groups)
        .filter(|(_, g)| !g.is_empty())
        .map(|(r, g)| region_score(&r.region_id, g))
        .collect::<Result<_>>()?;
    Ok(RegionScores { scores, unassigned })
}

pub fn levels_csv(levels: &[LocationLevel]) -> String {
    let mut out = String::from("point_id,n,level\n");
    for l in levels {
        let _ = writeln!(out, "{},{},{}", csv_field(&l.point_id), l.views_counted, l.level);
    }
    out
}

pub fn scores_csv(scores: &[RegionScore]) -> String {
    let mut out = String::from("region_id,n,mean_level\n");
    for s in scores {
        let _ = writeln!(out, "{},{},{}", csv_field(&s.region_id), s.n, s.mean_level);
    }
    out
}

/// Image counts per capture year, with a bucket for unknown years.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearHistogram {
    pub counts: BTreeMap<i32, u64>,
    pub unknown: u64,
}

impl YearHistogram {
    pub fn add(&mut self, year: Option<i32>, count: u64) {
        match year {
            Some(y) => *self.counts.entry(y).or_insert(0) += count,
            None => self.unknown += count,
        }
    }

    pub fn count(&self, year: i32) -> u64 {
        self.counts.get(&year).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum::<u64>() + self.unknown
    }

    /// Fraction of all images captured in `year`; 0 for an empty histogram.
    pub fn share(&self, year: i32) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.count(year) as f64 / t as f64,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("year,count\n");
        for (y, c) in &self.counts {
            let _ = writeln!(out, "{y},{c}");
        }
        let _ = writeln!(out, "unknown,{}", self.unknown);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::DetectionRegion;
    use crate::geo::GeoPoint;
    use crate::sampling::{GridSpec, SamplePoint};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(x: f64, y: f64, s: f64, c: f64) -> DetectionRegion {
        DetectionRegion::new(vec![[x, y], [x + s, y], [x + s, y + s], [x, y + s]], c)
    }

    fn set(regions: Vec<DetectionRegion>) -> DetectionSet {
        DetectionSet {
            image_id: "img".into(),
            detector_id: "t".into(),
            regions,
        }
    }

    fn lvl(id: &str, level: f64) -> LocationLevel {
        LocationLevel {
            point_id: id.into(),
            level,
            views_counted: 4,
        }
    }

    #[test]
    fn empty_views_give_zero() {
        let e = set(vec![]);
        let views = vec![ViewDetections { set: &e, dims: Some((640, 640)) }; 4];
        let l = location_level("p", &views, &LevelOptions::default()).unwrap();
        assert_eq!(l.level, 0.0);
        assert_eq!(l.views_counted, 4);
    }

    #[test]
    fn one_square_in_a_640_view() {
        let s = set(vec![square(100.0, 100.0, 64.0, 0.9)]);
        let views = [ViewDetections { set: &s, dims: Some((640, 640)) }];
        let l = location_level("p", &views, &LevelOptions::default()).unwrap();
        assert!((l.level - 4096.0 / 409_600.0).abs() < 1e-15);
        let raw = LevelOptions {
            mode: Mode::RawPx,
            ..Default::default()
        };
        assert_eq!(location_level("p", &views, &raw).unwrap().level, 4096.0);
    }

    #[test]
    fn views_add_up() {
        // 0.1 and 0.2 of a 100x100 view
        let a = set(vec![DetectionRegion::new(vec![[0.0, 0.0], [100.0, 0.0], [100.0, 10.0], [0.0, 10.0]], 1.0)]);
        let b = set(vec![DetectionRegion::new(vec![[0.0, 0.0], [100.0, 0.0], [100.0, 20.0], [0.0, 20.0]], 1.0)]);
        let views = [
            ViewDetections { set: &a, dims: Some((100, 100)) },
            ViewDetections { set: &b, dims: Some((100, 100)) },
        ];
        let l = location_level("p", &views, &LevelOptions::default()).unwrap();
        assert!((l.level - 0.3).abs() < 1e-12);
    }

    #[test]
    fn tau_and_dedup() {
        let s = set(vec![square(0.0, 0.0, 100.0, 0.9), square(50.0, 0.0, 100.0, 0.8), square(300.0, 300.0, 10.0, 0.2)]);
        let views = [ViewDetections { set: &s, dims: Some((640, 480)) }];
        let union = LevelOptions {
            mode: Mode::RawPx,
            dedup: Dedup::Union,
            tau: 0.5,
        };
        assert_eq!(location_level("p", &views, &union).unwrap().level, 15_000.0);
        let raw = LevelOptions {
            dedup: Dedup::RawSum,
            ..union
        };
        assert_eq!(location_level("p", &views, &raw).unwrap().level, 20_000.0);
        let all = LevelOptions { tau: 0.0, ..raw };
        assert_eq!(location_level("p", &views, &all).unwrap().level, 20_100.0);
    }

    #[test]
    fn fraction_mode_needs_dims() {
        let s = set(vec![square(0.0, 0.0, 10.0, 0.9)]);
        let views = [ViewDetections { set: &s, dims: None }];
        assert!(matches!(
            location_level("p", &views, &LevelOptions::default()),
            Err(Error::MissingDims(_))
        ));
    }

    #[test]
    fn region_score_examples() {
        assert_eq!(region_score("r", &[lvl("a", 0.3)]).unwrap().mean_level, 0.3);
        let s = region_score("r", &[lvl("a", 0.3), lvl("b", 0.1)]).unwrap();
        assert!((s.mean_level - 0.2).abs() < 1e-15);
        assert_eq!(s.n, 2);
        assert!(matches!(region_score("r", &[]), Err(Error::EmptyRegion(_))));
    }

    #[test]
    fn hundred_random_levels_match_a_plain_fold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let levels: Vec<_> = (0..100).map(|i| lvl(&i.to_string(), rng.gen_range(0.0..4.0))).collect();
        let oracle = levels.iter().fold(0.0, |acc, l| acc + l.level) / 100.0;
        assert!((region_score("r", &levels).unwrap().mean_level - oracle).abs() < 1e-12);
    }

    fn two_region_fixture() -> (Vec<RegionPolygon>, SamplePlan) {
        let west = RegionPolygon::rectangle("west", GeoPoint::new(0.0, 0.0).unwrap(), GeoPoint::new(1.0, 0.6).unwrap()).unwrap();
        let east = RegionPolygon::rectangle("east", GeoPoint::new(0.0, 0.6).unwrap(), GeoPoint::new(1.0, 1.0).unwrap()).unwrap();
        // 10 columns at lon 0.05..0.95: 6 west, 4 east, 10 rows each
        let mut points = Vec::new();
        for r in 0..10 {
            for c in 0..10 {
                let p = GeoPoint::new(0.05 + 0.1 * f64::from(r), 0.05 + 0.1 * f64::from(c)).unwrap();
                points.push(SamplePoint::new(p));
            }
        }
        let plan = SamplePlan {
            spec: GridSpec::default(),
            region_id: "all".into(),
            points,
        };
        (vec![west, east], plan)
    }

    #[test]
    fn sixty_forty_split() {
        let (regions, plan) = two_region_fixture();
        let levels: Vec<_> = plan.points.iter().map(|p| lvl(&p.point_id, 1.0)).collect();
        let out = score_by_region(&regions, &plan, &levels).unwrap();
        assert_eq!(out.unassigned, 0);
        assert_eq!(out.scores.iter().map(|s| (s.region_id.as_str(), s.n)).collect::<Vec<_>>(), vec![("west", 60), ("east", 40)]);
    }

    #[test]
    fn single_region_matches_region_score_and_outsiders_are_counted() {
        let (regions, mut plan) = two_region_fixture();
        let outside = SamplePoint::new(GeoPoint::new(5.0, 5.0).unwrap());
        plan.points.push(outside.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let levels: Vec<_> = plan.points.iter().map(|p| lvl(&p.point_id, rng.gen_range(0.0..1.0))).collect();
        let all = RegionPolygon::merge("all", &regions).unwrap();
        let out = score_by_region(std::slice::from_ref(&all), &plan, &levels).unwrap();
        assert_eq!(out.unassigned, 1);
        let inside: Vec<_> = levels.iter().filter(|l| l.point_id != outside.point_id).cloned().collect();
        assert_eq!(out.scores, vec![region_score("all", &inside).unwrap()]);
    }

    #[test]
    fn shared_edges_are_not_overlaps_but_interiors_are() {
        let (regions, _) = two_region_fixture();
        let on_edge = GeoPoint::new(0.5, 0.6).unwrap();
        assert_eq!(assign_region("e", on_edge, &regions).unwrap(), Some(0));
        let big = RegionPolygon::rectangle("big", GeoPoint::new(0.0, 0.0).unwrap(), GeoPoint::new(1.0, 1.0).unwrap()).unwrap();
        let with_overlap = vec![regions[0].clone(), big];
        assert!(matches!(
            assign_region("x", GeoPoint::new(0.5, 0.3).unwrap(), &with_overlap),
            Err(Error::OverlappingRegions { .. })
        ));
    }

    #[test]
    fn histogram_bookkeeping() {
        let mut h = YearHistogram::default();
        h.add(Some(2017), 3);
        h.add(Some(2015), 1);
        h.add(None, 1);
        assert_eq!(h.total(), 5);
        assert_eq!(h.count(2016), 0);
        assert!((h.share(2017) - 0.6).abs() < 1e-15);
        assert_eq!(h.to_csv(), "year,count\n2015,1\n2017,3\nunknown,1\n");
        assert_eq!(YearHistogram::default().share(2017), 0.0);
    }

    #[test]
    fn csv_rows() {
        assert_eq!(levels_csv(&[lvl("a_b", 0.5)]), "point_id,n,level\na_b,4,0.5\n");
        let s = RegionScore {
            region_id: "Vila, Norte".into(),
            n: 2,
            mean_level: 0.25,
        };
        assert_eq!(scores_csv(&[s]), "region_id,n,mean_level\n\"Vila, Norte\",2,0.25\n");
    }

    fn arb_square() -> impl Strategy<Value = DetectionRegion> {
        (0.0..150.0f64, 0.0..150.0f64, 20.0..100.0f64, 0.0..1.0f64)
            .prop_map(|(x, y, s, c)| square(x.round(), y.round(), s.round(), c))
    }

    proptest! {
        #[test]
        fn adding_a_region_never_lowers_the_level(
            base in proptest::collection::vec(arb_square(), 0..5),
            extra in arb_square(),
            raw_sum in any::<bool>(),
        ) {
            let opts = LevelOptions {
                dedup: if raw_sum { Dedup::RawSum } else { Dedup::Union },
                ..Default::default()
            };
            let a = set(base.clone());
            let mut more = base;
            more.push(extra);
            let b = set(more);
            let la = location_level("p", &[ViewDetections { set: &a, dims: Some((256, 256)) }], &opts).unwrap();
            let lb = location_level("p", &[ViewDetections { set: &b, dims: Some((256, 256)) }], &opts).unwrap();
            prop_assert!(lb.level >= la.level);
        }

        #[test]
        fn raw_sum_is_at_least_union(regions in proptest::collection::vec(arb_square(), 0..6)) {
            let s = set(regions);
            let views = [ViewDetections { set: &s, dims: Some((256, 256)) }];
            let u = location_level("p", &views, &LevelOptions { tau: 0.0, ..Default::default() }).unwrap();
            let r = location_level("p", &views, &LevelOptions { tau: 0.0, dedup: Dedup::RawSum, ..Default::default() }).unwrap();
            prop_assert!(r.level >= u.level);
        }

        #[test]
        fn fraction_level_is_scale_equivariant(regions in proptest::collection::vec(arb_square(), 1..4), factor in 2u32..4) {
            let s = set(regions.clone());
            let f = f64::from(factor);
            let scaled = set(regions.into_iter().map(|r| DetectionRegion::new(
                r.polygon_px.iter().map(|p| [p[0] * f, p[1] * f]).collect(), r.confidence)).collect());
            let opts = LevelOptions { tau: 0.0, ..Default::default() };
            let a = location_level("p", &[ViewDetections { set: &s, dims: Some((256, 256)) }], &opts).unwrap().level;
            let b = location_level("p", &[ViewDetections { set: &scaled, dims: Some((256 * factor, 256 * factor)) }], &opts).unwrap().level;
            prop_assert!((a - b).abs() <= 0.02 * a.max(b));
        }

        #[test]
        fn region_score_ignores_order(values in proptest::collection::vec(0.0..10.0f64, 1..50), seed in any::<u64>()) {
            let levels: Vec<_> = values.iter().enumerate().map(|(i, &v)| lvl(&i.to_string(), v)).collect();
            let mut shuffled = levels.clone();
            rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(region_score("r", &levels).unwrap(), region_score("r", &shuffled).unwrap());
        }

        #[test]
        fn fraction_levels_are_bounded_by_view_count(regions in proptest::collection::vec(arb_square(), 0..6), k in 1usize..5) {
            let s = set(regions);
            let views = vec![ViewDetections { set: &s, dims: Some((256, 256)) }; k];
            let l = location_level("p", &views, &LevelOptions { tau: 0.0, ..Default::default() }).unwrap();
            prop_assert!(l.level >= 0.0 && l.level <= k as f64);
        }
    }
}
