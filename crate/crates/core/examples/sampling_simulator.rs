//! Error of systematic and random sampling against a known regional mean.

use tagmap::geo::{GeoPoint, RegionPolygon};
use tagmap::report::error_chart_svg;
use tagmap::sampling::Strategy;
use tagmap::survey_sim::{bias_variance_report, report_csv, Bump, DensityField, EstimatorConfig, Simulation};

pub fn run() -> tagmap::Result<()> {
    let region = RegionPolygon::rectangle("area", GeoPoint::new(-23.60, -46.70)?, GeoPoint::new(-23.57, -46.67)?)?;
    let field = DensityField::new(vec![
        Bump { center: GeoPoint::new(-23.590, -46.690)?, amplitude: 2.0, sigma_m: 400.0 },
        Bump { center: GeoPoint::new(-23.578, -46.676)?, amplitude: 1.0, sigma_m: 650.0 },
    ])?;
    let sim = Simulation::new(field, region)?;
    println!("reference mean {:.6}", sim.true_mean);

    let configs = [
        EstimatorConfig { strategy: Strategy::Systematic, param: 400.0 },
        EstimatorConfig { strategy: Strategy::Systematic, param: 200.0 },
        EstimatorConfig { strategy: Strategy::Systematic, param: 100.0 },
        EstimatorConfig { strategy: Strategy::Random, param: 100.0 },
        EstimatorConfig { strategy: Strategy::Random, param: 400.0 },
    ];
    let seeds: Vec<u64> = (0..50).collect();
    let rows = bias_variance_report(&sim, &configs, &seeds)?;
    print!("{}", report_csv(&rows));
    let chart = error_chart_svg(&rows);
    println!("chart: {} bytes of SVG", chart.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> tagmap::Result<()> {
    run()
}
