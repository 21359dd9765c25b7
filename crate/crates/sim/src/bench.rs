//! Wall-clock scaling of the estimators in n (fixed r) and of the
//! time-dependent subsample fit in r (fixed n).

use std::time::Instant;

use mcox_core::cox::{newton_raphson_fit, NewtonOptions};
use mcox_core::data::Dataset;
use mcox_core::subsample::{fit_uniform, SubsamplePlan};
use mcox_core::{run_mcox, CoxError, McoxConfig, MomentChoice, Result};
use nalgebra::DVector;
use serde::Serialize;

use crate::dgp::{generate_dataset, CovariateKind, DgpConfig};
use crate::replicate::{EstimatorKind, SUBSAMPLE_SEED_SALT};

pub const DEFAULT_REPEATS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub estimator: EstimatorKind,
    pub covariate: &'static str,
    pub n: usize,
    pub r: usize,
    pub median_ms: f64,
    pub runs_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub estimator: EstimatorKind,
    pub covariate: &'static str,
    pub slope: f64,
    /// Exponent of n in the estimator's complexity at fixed r.
    pub expected: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub slopes: Vec<SlopeRow>,
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Complexity exponent in n at fixed r: quadratic for the whole-data fit
/// with time-dependent covariates, linear otherwise.
pub fn expected_exponent(kind: EstimatorKind, covariate: CovariateKind) -> f64 {
    match (kind, covariate) {
        (EstimatorKind::Whole, CovariateKind::TimeDependent) => 2.0,
        _ => 1.0,
    }
}

fn exponent_holds(slope: f64, expected: f64) -> bool {
    if expected >= 2.0 {
        slope >= 1.7
    } else {
        (slope - expected).abs() <= 0.25
    }
}

/// Wall time of one estimator run on `ds`, in milliseconds.
pub fn time_estimator(ds: &Dataset, kind: EstimatorKind, r: usize, seed: u64) -> Result<f64> {
    let opts = NewtonOptions::default();
    let plan = SubsamplePlan::new(r, seed ^ SUBSAMPLE_SEED_SALT);
    let t = Instant::now();
    match kind {
        EstimatorKind::Whole => {
            newton_raphson_fit(ds, &DVector::zeros(ds.p()), &opts)?;
        }
        EstimatorKind::Uni => {
            fit_uniform(ds, &plan, &opts)?;
        }
        EstimatorKind::McoxOpt | EstimatorKind::McoxApp | EstimatorKind::Oses => {
            let moment = if kind == EstimatorKind::McoxApp { MomentChoice::Aft } else { MomentChoice::Optimal };
            let mut cfg = McoxConfig::new(plan, moment);
            cfg.with_oses = kind == EstimatorKind::Oses;
            run_mcox(ds, &cfg)?;
        }
    }
    Ok(t.elapsed().as_secs_f64() * 1e3)
}

/// Median-of-`repeats` wall time per estimator on each dataset of the
/// grid, with a log-log slope per estimator. Datasets are generated
/// outside the timed region.
pub fn timing_benchmark(
    grid: &[DgpConfig],
    r: usize,
    estimators: &[EstimatorKind],
    repeats: usize,
) -> Result<BenchTable> {
    if grid.len() < 2 {
        return Err(CoxError::InvalidArgument("timing grid needs at least two sizes".into()));
    }
    if repeats == 0 || estimators.is_empty() {
        return Err(CoxError::InvalidArgument("need at least one repeat and one estimator".into()));
    }
    let covariate = grid[0].covariate;
    if grid.iter().any(|c| c.covariate != covariate) {
        return Err(CoxError::InvalidArgument("timing grid mixes covariate kinds".into()));
    }
    let mut rows = Vec::new();
    for cfg in grid {
        let ds = generate_dataset(cfg)?;
        for &kind in estimators {
            let runs_ms = (0..repeats).map(|_| time_estimator(&ds, kind, r, cfg.seed)).collect::<Result<Vec<_>>>()?;
            rows.push(BenchRow {
                estimator: kind,
                covariate: covariate.name(),
                n: cfg.n,
                r,
                median_ms: median(&runs_ms),
                runs_ms,
            });
        }
    }
    let slopes = estimators
        .iter()
        .map(|&kind| {
            let (ns, ts): (Vec<f64>, Vec<f64>) =
                rows.iter().filter(|row| row.estimator == kind).map(|row| (row.n as f64, row.median_ms)).unzip();
            let slope = loglog_slope(&ns, &ts);
            let expected = expected_exponent(kind, covariate);
            SlopeRow { estimator: kind, covariate: covariate.name(), slope, expected, holds: exponent_holds(slope, expected) }
        })
        .collect();
    Ok(BenchTable { rows, slopes })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseScaling {
    pub n: usize,
    pub rs: Vec<usize>,
    pub median_ms: Vec<f64>,
    /// Geometric mean of successive time ratios, per doubling of r.
    pub factor_per_doubling: f64,
}

/// Median subsample-fit phase of MCox-APP for each r in `rs` on one
/// dataset. `rs` should grow by factors of two.
pub fn subsample_fit_scaling(cfg: &DgpConfig, rs: &[usize], repeats: usize) -> Result<PhaseScaling> {
    if rs.len() < 2 || repeats == 0 {
        return Err(CoxError::InvalidArgument("need two subsample sizes and one repeat".into()));
    }
    let ds = generate_dataset(cfg)?;
    let mut med = Vec::with_capacity(rs.len());
    for &r in rs {
        let plan = SubsamplePlan::new(r, cfg.seed ^ SUBSAMPLE_SEED_SALT);
        let cfgm = McoxConfig::new(plan, MomentChoice::Aft);
        let runs = (0..repeats)
            .map(|_| run_mcox(&ds, &cfgm).map(|run| run.timings.subsample_fit))
            .collect::<Result<Vec<_>>>()?;
        med.push(median(&runs));
    }
    let doublings = (rs[rs.len() - 1] as f64 / rs[0] as f64).log2();
    let factor = (med[med.len() - 1] / med[0]).powf(1.0 / doublings);
    Ok(PhaseScaling { n: cfg.n, rs: rs.to_vec(), median_ms: med, factor_per_doubling: factor })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn exponent_flags() {
        assert!(exponent_holds(1.1, 1.0));
        assert!(!exponent_holds(1.3, 1.0));
        assert!(exponent_holds(1.8, 2.0));
        assert!(!exponent_holds(1.5, 2.0));
    }

    #[test]
    fn tiny_benchmark_runs() {
        let grid: Vec<DgpConfig> =
            [2000, 4000].iter().map(|&n| DgpConfig::new(n, CovariateKind::TimeIndependent, 3)).collect();
        let table = timing_benchmark(&grid, 200, &[EstimatorKind::Uni, EstimatorKind::McoxApp], 1).unwrap();
        assert_eq!(table.rows.len(), 4);
        assert_eq!(table.slopes.len(), 2);
        assert!(table.rows.iter().all(|r| r.median_ms >= 0.0));
    }
}
