//! Monte Carlo replication of the estimators over fresh simulated datasets.

use std::time::Instant;

use mcox_core::cox::{newton_raphson_fit, NewtonOptions};
use mcox_core::subsample::{fit_uniform, SubsamplePlan};
use mcox_core::{run_mcox, CoxError, McoxConfig, MomentChoice, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dgp::{generate_dataset, DgpConfig};

/// Mixed into the replication seed before subsampling, so the subsample
/// draws never share a ChaCha stream with the covariate draws.
pub const SUBSAMPLE_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EstimatorKind {
    #[serde(rename = "whole")]
    Whole,
    #[serde(rename = "uni")]
    Uni,
    #[serde(rename = "mcox-opt")]
    McoxOpt,
    #[serde(rename = "mcox-app")]
    McoxApp,
    #[serde(rename = "oses")]
    Oses,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Whole,
        EstimatorKind::Uni,
        EstimatorKind::McoxOpt,
        EstimatorKind::McoxApp,
        EstimatorKind::Oses,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Whole => "whole",
            EstimatorKind::Uni => "uni",
            EstimatorKind::McoxOpt => "mcox-opt",
            EstimatorKind::McoxApp => "mcox-app",
            EstimatorKind::Oses => "oses",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = CoxError;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CoxError::InvalidArgument(format!("unknown estimator `{s}`")))
    }
}

/// One estimator's output on one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub beta: Vec<f64>,
    /// Diagonal of the plug-in variance, when the estimator has one.
    pub var_diag: Option<Vec<f64>>,
    pub time_ms: f64,
    /// pilot, moment pass, subsample fit, correction (MCox pipelines only).
    pub phases_ms: Option<[f64; 4]>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ReplicationOptions {
    pub newton: NewtonOptions,
    /// Pilot size override; `None` uses ⌈r^{2/3} ln r⌉.
    pub pilot_size: Option<usize>,
    /// Level of the Wald intervals whose coverage is reported.
    pub level: f64,
}

impl Default for ReplicationOptions {
    fn default() -> Self {
        Self { newton: NewtonOptions::default(), pilot_size: None, level: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseMeans {
    pub pilot: f64,
    pub moment_pass: f64,
    pub subsample_fit: f64,
    pub correction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub estimator: EstimatorKind,
    pub covariate: &'static str,
    pub n: usize,
    pub r: usize,
    /// Replications that produced an estimate.
    pub n_reps: usize,
    pub failures: usize,
    pub nb: f64,
    pub nse: f64,
    pub mse: f64,
    /// Monte Carlo standard error of `mse`.
    pub mse_se: f64,
    pub mean_time_ms: f64,
    pub phases_ms: Option<PhaseMeans>,
    /// Pooled fraction of coordinates whose Wald interval covers β₀.
    pub coverage: Option<f64>,
    /// Mean plug-in standard error over replications and coordinates.
    pub ase: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplicationOutput {
    pub reports: Vec<ReplicationReport>,
    /// Per estimator (same order as requested), one entry per replication;
    /// `None` marks a failed replication.
    pub draws: Vec<(EstimatorKind, Vec<Option<Draw>>)>,
}

impl ReplicationOutput {
    pub fn report(&self, kind: EstimatorKind) -> Option<&ReplicationReport> {
        self.reports.iter().find(|r| r.estimator == kind)
    }

    pub fn draws(&self, kind: EstimatorKind) -> Option<&[Option<Draw>]> {
        self.draws.iter().find(|(k, _)| *k == kind).map(|(_, d)| d.as_slice())
    }

    /// Successful estimates of `kind` as an N×p matrix, in replication order.
    pub fn beta_matrix(&self, kind: EstimatorKind) -> Option<DMatrix<f64>> {
        let rows: Vec<&Draw> = self.draws(kind)?.iter().flatten().collect();
        let p = rows.first()?.beta.len();
        Some(DMatrix::from_fn(rows.len(), p, |i, j| rows[i].beta[j]))
    }
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0_f64, 0.0_f64);
    for v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + c
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn diag(m: &DMatrix<f64>) -> Vec<f64> {
    m.diagonal().iter().copied().collect()
}

fn mcox_draws(
    ds: &mcox_core::data::Dataset,
    plan: SubsamplePlan,
    moment: MomentChoice,
    with_oses: bool,
    opts: &ReplicationOptions,
) -> (Option<Draw>, Option<Draw>) {
    let mut cfg = McoxConfig::new(plan, moment);
    cfg.with_oses = with_oses;
    cfg.newton = opts.newton;
    let t = Instant::now();
    let run = match run_mcox(ds, &cfg) {
        Ok(run) if run.uni.converged => run,
        _ => return (None, None),
    };
    let total = ms(t);
    let tm = run.timings;
    let phases = Some([tm.pilot, tm.moment_pass, tm.subsample_fit, tm.correction]);
    let res = &run.result;
    let mcox = Draw {
        beta: res.beta_mcox.iter().copied().collect(),
        var_diag: (!res.fallback).then(|| diag(&res.variance)),
        time_ms: total,
        phases_ms: phases,
        alpha: res.alpha,
    };
    let oses = run.beta_oses.as_ref().map(|b| Draw {
        beta: b.iter().copied().collect(),
        var_diag: None,
        time_ms: total,
        phases_ms: phases,
        alpha: None,
    });
    (Some(mcox), oses)
}

/// Every requested estimator on the dataset of replication `rep`.
pub fn replicate_once(
    cfg: &DgpConfig,
    estimators: &[EstimatorKind],
    r: usize,
    rep: usize,
    opts: &ReplicationOptions,
) -> Vec<Option<Draw>> {
    let seed = cfg.seed.wrapping_add(rep as u64);
    let ds = match generate_dataset(&cfg.with_seed(seed)) {
        Ok(ds) => ds,
        Err(_) => return vec![None; estimators.len()],
    };
    let mut plan = SubsamplePlan::new(r, seed ^ SUBSAMPLE_SEED_SALT);
    if let Some(r0) = opts.pilot_size {
        plan = plan.with_pilot_size(r0);
    }
    let wants = |k| estimators.contains(&k);
    let (opt, oses) = if wants(EstimatorKind::McoxOpt) || wants(EstimatorKind::Oses) {
        mcox_draws(&ds, plan, MomentChoice::Optimal, wants(EstimatorKind::Oses), opts)
    } else {
        (None, None)
    };
    let app = if wants(EstimatorKind::McoxApp) {
        mcox_draws(&ds, plan, MomentChoice::Aft, false, opts).0
    } else {
        None
    };
    estimators
        .iter()
        .map(|kind| match kind {
            EstimatorKind::Whole => {
                let t = Instant::now();
                let fit = newton_raphson_fit(&ds, &DVector::zeros(ds.p()), &opts.newton).ok()?;
                let time_ms = ms(t);
                fit.converged.then(|| Draw {
                    beta: fit.beta_hat.iter().copied().collect(),
                    var_diag: Some(diag(&fit.variance)),
                    time_ms,
                    phases_ms: None,
                    alpha: None,
                })
            }
            EstimatorKind::Uni => {
                let t = Instant::now();
                let (fit, _) = fit_uniform(&ds, &plan, &opts.newton).ok()?;
                let time_ms = ms(t);
                fit.converged.then(|| Draw {
                    beta: fit.beta_hat.iter().copied().collect(),
                    var_diag: Some(diag(&fit.variance)),
                    time_ms,
                    phases_ms: None,
                    alpha: None,
                })
            }
            EstimatorKind::McoxOpt => opt.clone(),
            EstimatorKind::McoxApp => app.clone(),
            EstimatorKind::Oses => oses.clone(),
        })
        .collect()
}

fn summarize(
    kind: EstimatorKind,
    cfg: &DgpConfig,
    r: usize,
    draws: &[Option<Draw>],
    z: f64,
) -> ReplicationReport {
    let ok: Vec<&Draw> = draws.iter().flatten().collect();
    let m = ok.len();
    let p = cfg.p;
    let mf = m as f64;
    let mean_of = |f: &dyn Fn(&Draw) -> f64| compensated_sum(ok.iter().map(|d| f(d))) / mf;

    let mut nb2 = 0.0;
    let mut var_sum = 0.0;
    for j in 0..p {
        let mean = mean_of(&|d| d.beta[j]);
        nb2 += (mean - cfg.beta0[j]).powi(2);
        var_sum += mean_of(&|d| (d.beta[j] - mean).powi(2));
    }
    let sq_err = |d: &Draw| d.beta.iter().zip(&cfg.beta0).map(|(b, t)| (b - t).powi(2)).sum::<f64>();
    let mse = mean_of(&sq_err);
    let mse_var = mean_of(&|d| (sq_err(d) - mse).powi(2));
    let mse_se = if m > 1 { (mse_var / (mf - 1.0)).sqrt() } else { f64::NAN };

    let phases_ms = ok.first().and_then(|d| d.phases_ms).map(|_| {
        let ph = |k: usize| mean_of(&|d| d.phases_ms.map_or(0.0, |a| a[k]));
        PhaseMeans { pilot: ph(0), moment_pass: ph(1), subsample_fit: ph(2), correction: ph(3) }
    });

    let with_var: Vec<(&Draw, &Vec<f64>)> = ok.iter().filter_map(|d| d.var_diag.as_ref().map(|v| (*d, v))).collect();
    let (coverage, ase) = if with_var.is_empty() {
        (None, None)
    } else {
        let cells = (with_var.len() * p) as f64;
        let mut covered = 0usize;
        let mut ses = Vec::with_capacity(with_var.len() * p);
        for (d, v) in &with_var {
            for j in 0..p {
                let se = v[j].max(0.0).sqrt();
                ses.push(se);
                if (d.beta[j] - cfg.beta0[j]).abs() <= z * se {
                    covered += 1;
                }
            }
        }
        (Some(covered as f64 / cells), Some(compensated_sum(ses) / cells))
    };

    ReplicationReport {
        estimator: kind,
        covariate: cfg.covariate.name(),
        n: cfg.n,
        r,
        n_reps: m,
        failures: draws.len() - m,
        nb: nb2.sqrt(),
        nse: var_sum.sqrt(),
        mse,
        mse_se,
        mean_time_ms: mean_of(&|d| d.time_ms),
        phases_ms,
        coverage,
        ase,
    }
}

/// Runs `n_reps` replications (seed = `cfg.seed` + replication index) in
/// parallel and aggregates NB, NSE and MSE per estimator. NSE uses the
/// 1/N Monte Carlo variance so that MSE = NB² + NSE² holds exactly.
pub fn run_replications_with(
    cfg: &DgpConfig,
    estimators: &[EstimatorKind],
    r: usize,
    n_reps: usize,
    opts: &ReplicationOptions,
) -> Result<ReplicationOutput> {
    cfg.validate()?;
    if n_reps < 2 {
        return Err(CoxError::InvalidArgument("at least two replications are needed".into()));
    }
    if r == 0 {
        return Err(CoxError::InvalidArgument("subsample size must be positive".into()));
    }
    if estimators.is_empty() {
        return Err(CoxError::InvalidArgument("no estimators requested".into()));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(CoxError::InvalidArgument(format!("confidence level {} outside (0, 1)", opts.level)));
    }
    let mut kinds: Vec<EstimatorKind> = Vec::with_capacity(estimators.len());
    for k in estimators {
        if !kinds.contains(k) {
            kinds.push(*k);
        }
    }
    let per_rep: Vec<Vec<Option<Draw>>> =
        (0..n_reps).into_par_iter().map(|rep| replicate_once(cfg, &kinds, r, rep, opts)).collect();

    let z = Normal::standard().inverse_cdf(0.5 + opts.level / 2.0);
    let mut draws = Vec::with_capacity(kinds.len());
    let mut reports = Vec::with_capacity(kinds.len());
    for (e, kind) in kinds.iter().enumerate() {
        let column: Vec<Option<Draw>> = per_rep.iter().map(|row| row[e].clone()).collect();
        if column.iter().all(Option::is_none) {
            return Err(CoxError::InvalidArgument(format!(
                "estimator {} failed on every replication",
                kind.name()
            )));
        }
        reports.push(summarize(*kind, cfg, r, &column, z));
        draws.push((*kind, column));
    }
    Ok(ReplicationOutput { reports, draws })
}

pub fn run_replications(
    cfg: &DgpConfig,
    estimators: &[EstimatorKind],
    r: usize,
    n_reps: usize,
) -> Result<ReplicationOutput> {
    run_replications_with(cfg, estimators, r, n_reps, &ReplicationOptions::default())
}
