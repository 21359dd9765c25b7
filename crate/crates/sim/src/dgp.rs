//! Cox-model data with unit baseline hazard and multivariate-t covariates.
//!
//! Every random ingredient has its own ChaCha8 stream of the configured
//! seed (covariates, failure exponentials, censoring, drift), so changing
//! one ingredient leaves the others untouched. In particular, a drift with
//! zero variance reproduces the time-independent failure times exactly.

use mcox_core::data::{CovariatePathSpec, Dataset};
use mcox_core::{CoxError, Result};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal, Uniform};
use serde::Serialize;

const STREAM_X: u64 = 0;
const STREAM_E: u64 = 1;
const STREAM_C: u64 = 2;
const STREAM_EPS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateKind {
    TimeIndependent,
    TimeDependent,
}

impl CovariateKind {
    pub fn name(self) -> &'static str {
        match self {
            CovariateKind::TimeIndependent => "time-independent",
            CovariateKind::TimeDependent => "time-dependent",
        }
    }
}

impl std::str::FromStr for CovariateKind {
    type Err = CoxError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ti" | "time-independent" => Ok(CovariateKind::TimeIndependent),
            "td" | "time-dependent" => Ok(CovariateKind::TimeDependent),
            other => Err(CoxError::InvalidArgument(format!("unknown covariate kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DgpConfig {
    pub n: usize,
    pub p: usize,
    pub beta0: Vec<f64>,
    pub covariate: CovariateKind,
    pub t_df: f64,
    pub ar_rho: f64,
    pub eps_var: f64,
    pub c0: f64,
    pub seed: u64,
}

impl DgpConfig {
    pub fn new(n: usize, covariate: CovariateKind, seed: u64) -> Self {
        Self {
            n,
            p: 5,
            beta0: vec![0.2, 0.2, 0.1, 0.1, 0.1],
            covariate,
            t_df: 10.0,
            ar_rho: 0.5,
            eps_var: 0.4,
            c0: 3.275,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoxError::InvalidArgument(m.to_string()));
        if self.n == 0 {
            return bad("n must be positive");
        }
        if self.beta0.len() != self.p || self.p == 0 {
            return bad("beta0 must have p > 0 entries");
        }
        if !(self.c0 > 0.0) {
            return bad("c0 must be positive");
        }
        if !(self.t_df > 2.0) {
            return bad("t degrees of freedom must exceed 2");
        }
        if !(0.0..1.0).contains(&self.ar_rho) {
            return bad("AR correlation must lie in [0, 1)");
        }
        if !(self.eps_var >= 0.0) {
            return bad("drift variance must be nonnegative");
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }
}

/// A generated dataset together with its latent times.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub dataset: Dataset,
    /// Failure times before censoring; `f64::INFINITY` when the cumulative
    /// hazard never reaches the drawn exponential.
    pub failure_times: Vec<f64>,
    pub censoring_times: Vec<f64>,
}

impl Simulated {
    pub fn censoring_fraction(&self) -> f64 {
        1.0 - self.dataset.n_events() as f64 / self.dataset.n() as f64
    }
}

/// Row-major n×p multivariate-t draws with AR(ρ) scale matrix.
fn t_covariates(cfg: &DgpConfig) -> Vec<f64> {
    let p = cfg.p;
    let scale = DMatrix::from_fn(p, p, |i, j| cfg.ar_rho.powi((i as i32 - j as i32).abs()));
    let l = scale.cholesky().expect("AR(ρ) matrix is positive definite for ρ < 1").l();
    let chi = ChiSquared::new(cfg.t_df).expect("df > 0");
    let mut rng = cfg.rng(STREAM_X);
    let mut out = Vec::with_capacity(cfg.n * p);
    let mut z = vec![0.0; p];
    for _ in 0..cfg.n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let w: f64 = chi.sample(&mut rng);
        let s = (w / cfg.t_df).sqrt();
        for i in 0..p {
            let lz: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
            out.push(lz / s);
        }
    }
    out
}

/// Cumulative hazard ∫₀ᵗ exp(a + b·u) du.
#[inline]
fn drift_hazard(a: f64, b: f64, t: f64) -> f64 {
    let x = b * t;
    let ratio = if x == 0.0 { 1.0 } else { x.exp_m1() / x };
    a.exp() * t * ratio
}

/// Solves ∫₀ᵀ exp(a + b·u) du = e by bisection, with the bracket grown
/// geometrically from [0, 1]. Returns infinity when the integral stays
/// below e for all T (possible when b < 0).
pub fn invert_drift_hazard(a: f64, b: f64, e: f64) -> f64 {
    if b == 0.0 {
        return e * (-a).exp();
    }
    if b < 0.0 && e >= a.exp() / -b {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while drift_hazard(a, b, hi) < e {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if drift_hazard(a, b, mid) < e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn generate_with_failure_times(cfg: &DgpConfig) -> Result<Simulated> {
    cfg.validate()?;
    let (n, p) = (cfg.n, cfg.p);
    let x = t_covariates(cfg);
    let mut rng_e = cfg.rng(STREAM_E);
    let mut rng_c = cfg.rng(STREAM_C);
    let unif = Uniform::new(0.0, cfg.c0).expect("c0 > 0");
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng_e)).collect();
    let c: Vec<f64> = (0..n).map(|_| unif.sample(&mut rng_c)).collect();
    let lin = |row: &[f64]| -> f64 { row.iter().zip(&cfg.beta0).map(|(a, b)| a * b).sum() };

    let (features, d, path, t): (Vec<f64>, usize, CovariatePathSpec, Vec<f64>) = match cfg.covariate {
        CovariateKind::TimeIndependent => {
            let t = (0..n).map(|i| e[i] * (-lin(&x[i * p..(i + 1) * p])).exp()).collect();
            (x, p, CovariatePathSpec::Constant, t)
        }
        CovariateKind::TimeDependent => {
            let mut rng = cfg.rng(STREAM_EPS);
            let sd = cfg.eps_var.sqrt();
            let eps: Vec<f64> = (0..n * p)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sd * z
                })
                .collect();
            let mut features = Vec::with_capacity(2 * n * p);
            let mut t = Vec::with_capacity(n);
            for i in 0..n {
                let xi = &x[i * p..(i + 1) * p];
                let ei = &eps[i * p..(i + 1) * p];
                t.push(invert_drift_hazard(lin(xi), lin(ei), e[i]));
                features.extend_from_slice(xi);
                features.extend_from_slice(ei);
            }
            (features, 2 * p, CovariatePathSpec::linear_drift(), t)
        }
    };
    let time: Vec<f64> = t.iter().zip(&c).map(|(a, b)| a.min(*b)).collect();
    let status: Vec<bool> = t.iter().zip(&c).map(|(a, b)| a < b).collect();
    let mut names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    if d > p {
        names.extend((1..=p).map(|j| format!("eps{j}")));
    }
    let dataset = Dataset::new(time, status, features, d, path)?.with_feature_names(names)?;
    Ok(Simulated { dataset, failure_times: t, censoring_times: c })
}

pub fn generate_dataset(cfg: &DgpConfig) -> Result<Dataset> {
    Ok(generate_with_failure_times(cfg)?.dataset)
}
