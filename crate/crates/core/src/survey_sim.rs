//! Sampling-error experiments on synthetic density fields.
//!
//! A field is a sum of Gaussian bumps measured with planar distances, which
//! is accurate over city-scale regions. The reference regional mean comes
//! from midpoint quadrature on a lattice ten times finer than the narrowest
//! bump.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{local_degree_steps, GeoPoint, RegionPolygon, METERS_PER_DEGREE};
use crate::sampling::{build_plan, build_systematic_grid, GridSpec, SamplePlan, Strategy};

/// Quadrature spacing as a fraction of the narrowest bump.
pub const QUADRATURE_FRACTION: f64 = 0.1;

/// Quadrature spacing for fields without bumps, where any lattice is exact.
const FLAT_QUADRATURE_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: GeoPoint,
    pub amplitude: f64,
    pub sigma_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityField {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub offset: f64,
    pub bumps: Vec<Bump>,
}

impl DensityField {
    pub fn new(bumps: Vec<Bump>) -> Result<Self> {
        let f = DensityField {
            seed: 0,
            offset: 0.0,
            bumps,
        };
        f.validate()?;
        Ok(f)
    }

    /// A field equal to `c` everywhere.
    pub fn constant(c: f64) -> Result<Self> {
        let f = DensityField {
            seed: 0,
            offset: c,
            bumps: Vec::new(),
        };
        f.validate()?;
        Ok(f)
    }

    /// `n` bumps with centers uniform over the region's bbox, amplitudes in
    /// [0.5, 2) and widths between 1/20 and 1/6 of the shorter bbox side.
    pub fn random(seed: u64, region: &RegionPolygon, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bb = region.bbox();
        let mid = bb.mid_lat().to_radians().cos();
        let side_m = ((bb.max_lat - bb.min_lat) * METERS_PER_DEGREE)
            .min((bb.max_lon - bb.min_lon) * METERS_PER_DEGREE * mid);
        let bumps = (0..n)
            .map(|_| Bump {
                center: GeoPoint::new(
                    rng.gen_range(bb.min_lat..=bb.max_lat),
                    rng.gen_range(bb.min_lon..=bb.max_lon),
                )
                .expect("bbox point"),
                amplitude: rng.gen_range(0.5..2.0),
                sigma_m: rng.gen_range(side_m / 20.0..side_m / 6.0),
            })
            .collect();
        DensityField {
            seed,
            offset: 0.0,
            bumps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.offset.is_finite() && self.offset >= 0.0) {
            return Err(Error::Config(format!("field offset {} must be finite and >= 0", self.offset)));
        }
        for b in &self.bumps {
            if !(b.amplitude.is_finite() && b.amplitude >= 0.0) {
                return Err(Error::Config(format!("bump amplitude {} must be finite and >= 0", b.amplitude)));
            }
            if !(b.sigma_m.is_finite() && b.sigma_m > 0.0) {
                return Err(Error::Config(format!("bump sigma_m {} must be positive", b.sigma_m)));
            }
        }
        Ok(())
    }

    pub fn value(&self, p: GeoPoint) -> f64 {
        self.offset
            + self
                .bumps
                .iter()
                .map(|b| {
                    let d2 = planar_distance2_m(p, b.center);
                    b.amplitude * (-d2 / (2.0 * b.sigma_m * b.sigma_m)).exp()
                })
                .sum::<f64>()
    }

    fn min_sigma_m(&self) -> Option<f64> {
        self.bumps.iter().map(|b| b.sigma_m).min_by(f64::total_cmp)
    }
}

/// Squared equirectangular distance, scaled at the mean latitude.
fn planar_distance2_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let k = ((a.lat() + b.lat()) / 2.0).to_radians().cos();
    let dy = (a.lat() - b.lat()) * METERS_PER_DEGREE;
    let dx = (a.lon() - b.lon()) * METERS_PER_DEGREE * k;
    dx * dx + dy * dy
}

/// Running mean; exact for constant input.
fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut m = 0.0;
    for (i, v) in values.enumerate() {
        m += (v - m) / (i + 1) as f64;
    }
    m
}

fn plan_mean(field: &DensityField, plan: &SamplePlan) -> f64 {
    mean(plan.points.iter().map(|p| field.value(p.location)))
}

/// The lattice behind [`true_regional_mean`]: cell midpoints of a grid
/// whose spacing is a tenth of the narrowest bump.
pub fn quadrature_spec(field: &DensityField, region: &RegionPolygon) -> Result<GridSpec> {
    let spacing = field
        .min_sigma_m()
        .map_or(FLAT_QUADRATURE_M, |s| s * QUADRATURE_FRACTION);
    let bb = region.bbox();
    let (dlat, dlon) = local_degree_steps(GeoPoint::new(bb.mid_lat(), bb.min_lon)?, spacing)?;
    let anchor = GeoPoint::new(bb.min_lat + dlat / 2.0, bb.min_lon + dlon / 2.0)?;
    Ok(GridSpec::systematic(spacing).with_anchor(anchor))
}

/// Reference mean of the field over the region.
pub fn true_regional_mean(field: &DensityField, region: &RegionPolygon) -> Result<f64> {
    let plan = build_systematic_grid(region, &quadrature_spec(field, region)?)?;
    Ok(plan_mean(field, &plan))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRun {
    pub strategy: Strategy,
    /// Spacing in meters for systematic runs, sample size for random runs.
    pub param: f64,
    pub seed: u64,
    pub estimate: f64,
    pub true_mean: f64,
    pub abs_error: f64,
}

/// A field and region with the reference mean computed once.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub field: DensityField,
    pub region: RegionPolygon,
    pub true_mean: f64,
}

impl Simulation {
    pub fn new(field: DensityField, region: RegionPolygon) -> Result<Self> {
        field.validate()?;
        let true_mean = true_regional_mean(&field, &region)?;
        Ok(Simulation {
            field,
            region,
            true_mean,
        })
    }

    /// Grid spec for one run. Systematic runs start at a seeded uniform
    /// offset within the first lattice cell.
    pub fn spec_for(&self, strategy: Strategy, param: f64, seed: u64) -> Result<GridSpec> {
        match strategy {
            Strategy::Random => {
                if !(param >= 1.0 && param.fract() == 0.0) {
                    return Err(Error::Config(format!("random sample size {param} must be a positive integer")));
                }
                Ok(GridSpec::random(param as usize, seed))
            }
            Strategy::Systematic => {
                let bb = self.region.bbox();
                let (dlat, dlon) = local_degree_steps(GeoPoint::new(bb.mid_lat(), bb.min_lon)?, param)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let anchor = GeoPoint::new(
                    bb.min_lat + rng.gen_range(0.0..1.0) * dlat,
                    bb.min_lon + rng.gen_range(0.0..1.0) * dlon,
                )?;
                Ok(GridSpec::systematic(param).with_anchor(anchor))
            }
        }
    }

    pub fn run_spec(&self, spec: &GridSpec) -> Result<EstimatorRun> {
        let plan = build_plan(&self.region, spec)?;
        let estimate = plan_mean(&self.field, &plan);
        let param = match spec.strategy {
            Strategy::Systematic => spec.spacing_m,
            Strategy::Random => spec.n_random as f64,
        };
        Ok(EstimatorRun {
            strategy: spec.strategy,
            param,
            seed: spec.seed,
            estimate,
            true_mean: self.true_mean,
            abs_error: (estimate - self.true_mean).abs(),
        })
    }

    pub fn run(&self, strategy: Strategy, param: f64, seed: u64) -> Result<EstimatorRun> {
        let mut spec = self.spec_for(strategy, param, seed)?;
        spec.seed = seed;
        self.run_spec(&spec)
    }
}

/// One estimate of the regional mean from a sample plan.
pub fn run_estimator(
    field: &DensityField,
    region: &RegionPolygon,
    strategy: Strategy,
    param: f64,
    seed: u64,
) -> Result<EstimatorRun> {
    Simulation::new(field.clone(), region.clone())?.run(strategy, param, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub strategy: Strategy,
    pub param: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceRow {
    pub strategy: Strategy,
    pub param: f64,
    pub runs: usize,
    /// Mean of estimate minus true mean.
    pub mean_error: f64,
    pub mean_abs_error: f64,
    /// Sample standard deviation of the estimates.
    pub std_error: f64,
}

/// Runs every config once per seed and summarizes each config's runs.
pub fn bias_variance_report(sim: &Simulation, configs: &[EstimatorConfig], seeds: &[u64]) -> Result<Vec<BiasVarianceRow>> {
    if configs.is_empty() || seeds.is_empty() {
        return Err(Error::Config("bias/variance report needs at least one config and one seed".into()));
    }
    configs
        .iter()
        .map(|c| {
            let runs: Vec<EstimatorRun> = seeds
                .par_iter()
                .map(|&s| sim.run(c.strategy, c.param, s))
                .collect::<Result<_>>()?;
            let errors: Vec<f64> = runs.iter().map(|r| r.estimate - r.true_mean).collect();
            let mean_error = mean(errors.iter().copied());
            let var = if runs.len() > 1 {
                errors.iter().map(|e| (e - mean_error).powi(2)).sum::<f64>() / (runs.len() - 1) as f64
            } else {
                0.0
            };
            Ok(BiasVarianceRow {
                strategy: c.strategy,
                param: c.param,
                runs: runs.len(),
                mean_error,
                mean_abs_error: mean(errors.iter().map(|e| e.abs())),
                std_error: var.sqrt(),
            })
        })
        .collect()
}

pub fn report_csv(rows: &[BiasVarianceRow]) -> String {
    let mut out = String::from("strategy,param,runs,mean_error,mean_abs_error,std_error\n");
    for r in rows {
        let strategy = match r.strategy {
            Strategy::Systematic => "systematic",
            Strategy::Random => "random",
        };
        let _ = writeln!(
            out,
            "{strategy},{},{},{},{},{}",
            r.param, r.runs, r.mean_error, r.mean_abs_error, r.std_error
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square_km(side_km: f64, lat: f64) -> RegionPolygon {
        let dlat = side_km * 1000.0 / METERS_PER_DEGREE;
        let dlon = dlat / lat.to_radians().cos();
        RegionPolygon::rectangle("sq", GeoPoint::new(lat, -46.0).unwrap(), GeoPoint::new(lat + dlat, -46.0 + dlon).unwrap())
            .unwrap()
    }

    fn two_bumps(region: &RegionPolygon) -> DensityField {
        let bb = region.bbox();
        let at = |fy: f64, fx: f64| {
            GeoPoint::new(bb.min_lat + fy * (bb.max_lat - bb.min_lat), bb.min_lon + fx * (bb.max_lon - bb.min_lon)).unwrap()
        };
        DensityField::new(vec![
            Bump { center: at(0.3, 0.35), amplitude: 2.0, sigma_m: 400.0 },
            Bump { center: at(0.7, 0.6), amplitude: 1.0, sigma_m: 700.0 },
        ])
        .unwrap()
    }

    #[test]
    fn constant_and_zero_fields() {
        let r = square_km(3.0, -23.5);
        let c = DensityField::constant(0.37).unwrap();
        assert!((true_regional_mean(&c, &r).unwrap() - 0.37).abs() < 1e-9);
        for strategy in [Strategy::Systematic, Strategy::Random] {
            let param = if strategy == Strategy::Random { 200.0 } else { 250.0 };
            assert_eq!(run_estimator(&c, &r, strategy, param, 5).unwrap().estimate, 0.37);
        }
        let zero = DensityField::new(vec![Bump { center: r.bbox().min_corner(), amplitude: 0.0, sigma_m: 100.0 }]).unwrap();
        assert_eq!(true_regional_mean(&zero, &r).unwrap(), 0.0);
    }

    #[test]
    fn lone_bump_integrates_to_the_gaussian_volume() {
        let r = square_km(10.0, -23.5);
        let bb = r.bbox();
        let center = GeoPoint::new(bb.mid_lat(), (bb.min_lon + bb.max_lon) / 2.0).unwrap();
        let f = DensityField::new(vec![Bump { center, amplitude: 3.0, sigma_m: 500.0 }]).unwrap();
        let expected = 2.0 * PI * 3.0 * 500.0 * 500.0 / (10_000.0 * 10_000.0);
        let got = true_regional_mean(&f, &r).unwrap();
        assert!((got - expected).abs() < 0.01 * expected, "{got} vs {expected}");
    }

    #[test]
    fn quadrature_lattice_reproduces_the_oracle() {
        let r = square_km(4.0, -23.5);
        let f = two_bumps(&r);
        let sim = Simulation::new(f.clone(), r.clone()).unwrap();
        let run = sim.run_spec(&quadrature_spec(&f, &r).unwrap()).unwrap();
        assert!((run.estimate - sim.true_mean).abs() < 1e-9);
        assert_eq!(run.abs_error, (run.estimate - run.true_mean).abs());
    }

    #[test]
    fn runs_are_reproducible() {
        let r = square_km(4.0, -23.5);
        let sim = Simulation::new(two_bumps(&r), r).unwrap();
        for strategy in [Strategy::Systematic, Strategy::Random] {
            let param = if strategy == Strategy::Random { 100.0 } else { 300.0 };
            assert_eq!(sim.run(strategy, param, 9).unwrap(), sim.run(strategy, param, 9).unwrap());
            assert_ne!(sim.run(strategy, param, 9).unwrap().estimate, sim.run(strategy, param, 10).unwrap().estimate);
        }
        assert!(sim.run(Strategy::Random, 2.5, 1).is_err());
    }

    #[test]
    fn random_std_error_halves_with_four_times_the_sample() {
        let r = square_km(4.0, -23.5);
        let sim = Simulation::new(two_bumps(&r), r).unwrap();
        let seeds: Vec<u64> = (0..200).collect();
        let rows = bias_variance_report(
            &sim,
            &[
                EstimatorConfig { strategy: Strategy::Random, param: 100.0 },
                EstimatorConfig { strategy: Strategy::Random, param: 400.0 },
            ],
            &seeds,
        )
        .unwrap();
        let ratio = rows[0].std_error / rows[1].std_error;
        assert!((ratio - 2.0).abs() <= 0.6, "{ratio}");
        let single = bias_variance_report(&sim, &[EstimatorConfig { strategy: Strategy::Systematic, param: 500.0 }], &seeds[..5]).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].runs, 5);
        assert!(report_csv(&single).starts_with("strategy,param,runs,mean_error,mean_abs_error,std_error\nsystematic,500,5,"));
    }

    #[test]
    fn field_validation_and_serde() {
        assert!(DensityField::constant(-1.0).is_err());
        let r = square_km(2.0, 10.0);
        let f = DensityField::random(4, &r, 3);
        assert_eq!(f, DensityField::random(4, &r, 3));
        f.validate().unwrap();
        assert!(f.bumps.iter().all(|b| r.bbox().contains(b.center)));
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(serde_json::from_str::<DensityField>(&text).unwrap(), f);
        let bad = r#"{"bumps":[{"center":{"lat":0,"lon":0},"amplitude":1,"sigma_m":0}]}"#;
        assert!(serde_json::from_str::<DensityField>(bad).unwrap().validate().is_err());
    }
}
