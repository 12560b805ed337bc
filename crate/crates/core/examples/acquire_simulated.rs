//! Acquire four views per point from the simulated provider, then keep only
//! locations with complete first-party coverage.

use std::sync::Arc;

use tagmap::acquisition::{acquire, year_histogram, AcquireOptions, Clock, Manifest, SimulatedClock, SimulatedProvider, Zone};
use tagmap::geo::{GeoPoint, RegionPolygon};
use tagmap::sampling::{build_plan, coverage_filter, GridSpec};

pub fn run() -> tagmap::Result<()> {
    let region = RegionPolygon::rectangle("bairro", GeoPoint::new(-23.56, -46.66)?, GeoPoint::new(-23.55, -46.65)?)?;
    let plan = build_plan(&region, &GridSpec::systematic(102.0))?;

    let provider = SimulatedProvider::new(42)
        .with_external_zone(Zone { center: GeoPoint::new(-23.553, -46.653)?, radius_m: 200.0 })
        .with_unmapped_zone(Zone { center: GeoPoint::new(-23.558, -46.658)?, radius_m: 120.0 })
        .without_payloads();
    let clock = Arc::new(SimulatedClock::new());
    let opts = AcquireOptions { clock: clock.clone(), ..AcquireOptions::default() };

    let mut manifest = Manifest::new();
    let stats = acquire(&plan, 4, &provider, &mut manifest, &opts)?;
    println!("{} points, {stats:?}", plan.points.len());
    println!("simulated time at 10 req/s: {:.1} s", clock.now().as_secs_f64());

    let again = acquire(&plan, 4, &provider, &mut manifest, &opts)?;
    println!("second pass served {} views from the manifest", again.cached);

    let covered = coverage_filter(&plan, &manifest, 4)?;
    println!("{} of {} points keep full first-party coverage", covered.points.len(), plan.points.len());

    let years = year_histogram(&manifest);
    print!("{}", years.to_csv());
    println!("share captured in 2017: {:.1}%", 100.0 * years.share(2017));
    Ok(())
}

#[allow(dead_code)]
fn main() -> tagmap::Result<()> {
    run()
}
