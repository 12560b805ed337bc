//! Per-location levels from four views and per-district mean levels.

use tagmap::detection::{DetectionRegion, DetectionSet};
use tagmap::geo::{GeoPoint, RegionPolygon};
use tagmap::metrics::{location_level, score_by_region, Dedup, LevelOptions, Mode, ViewDetections};
use tagmap::sampling::{build_plan, GridSpec};

fn view(id: &str, tags: &[(f64, f64, f64)]) -> DetectionSet {
    DetectionSet {
        image_id: id.into(),
        detector_id: "example".into(),
        regions: tags
            .iter()
            .map(|&(x, w, c)| DetectionRegion::new(vec![[x, 300.0], [x + w, 300.0], [x + w, 380.0], [x, 380.0]], c))
            .collect(),
    }
}

pub fn run() -> tagmap::Result<()> {
    let west = RegionPolygon::rectangle("oeste", GeoPoint::new(-23.56, -46.66)?, GeoPoint::new(-23.55, -46.655)?)?;
    let east = RegionPolygon::rectangle("leste", GeoPoint::new(-23.56, -46.655)?, GeoPoint::new(-23.55, -46.65)?)?;
    let survey = RegionPolygon::merge("survey", &[west.clone(), east.clone()])?;
    let plan = build_plan(&survey, &GridSpec::systematic(250.0))?;

    let options = [
        LevelOptions::default(),
        LevelOptions { dedup: Dedup::RawSum, ..LevelOptions::default() },
        LevelOptions { mode: Mode::RawPx, ..LevelOptions::default() },
    ];
    let walls = [
        view("n", &[(50.0, 120.0, 0.9), (120.0, 120.0, 0.8)]),
        view("e", &[]),
        view("s", &[(400.0, 60.0, 0.4)]),
        view("w", &[(10.0, 30.0, 0.95)]),
    ];
    let views: Vec<ViewDetections<'_>> = walls.iter().map(|s| ViewDetections { set: s, dims: Some((640, 640)) }).collect();
    for o in &options {
        let l = location_level("example", &views, o)?;
        println!("{:?}/{:?}: level {}", o.mode, o.dedup, l.level);
    }

    // Levels grow eastward so the two districts differ.
    let levels: Vec<_> = plan
        .points
        .iter()
        .map(|p| {
            let share = (p.location.lon() + 46.66) / 0.01;
            let tagged = [view("v", &[(0.0, 640.0 * share * 0.2, 0.9)])];
            let v = [ViewDetections { set: &tagged[0], dims: Some((640, 640)) }];
            location_level(&p.point_id, &v, &LevelOptions::default())
        })
        .collect::<tagmap::Result<_>>()?;
    let scores = score_by_region(&[west, east], &plan, &levels)?;
    for s in &scores.scores {
        println!("{}: n = {}, mean level {:.5}", s.region_id, s.n, s.mean_level);
    }
    print!("{}", tagmap::metrics::scores_csv(&scores.scores));
    Ok(())
}

#[allow(dead_code)]
fn main() -> tagmap::Result<()> {
    run()
}
