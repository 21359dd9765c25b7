//! Cox partial likelihood with Breslow ties.
//!
//! All whole-sample quantities carry the 1/n normalization:
//! `l(β) = n⁻¹ Σᵢ Δᵢ [βᵀXᵢ(Yᵢ) − log Σⱼ I(Yⱼ ≥ Yᵢ) exp(βᵀXⱼ(Yᵢ))]`, and the score
//! and information are its gradient and negative Hessian. Integrals against
//! dN are sums over distinct event times.
//!
//! Constant-path datasets reuse one vector of linear predictors per
//! evaluation and grow the risk set by suffix sums over the sort order, so a
//! pass is linear after sorting. Time-dependent paths re-evaluate every
//! at-risk covariate at each event time, which is quadratic in n.

pub(crate) mod accum;
mod baseline;

pub use baseline::{
    breslow_baseline, efficient_score_contributions, martingale_residuals, BaselineHazard,
    ScoreReference,
};

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{CoxError, Result};
use crate::linalg::{max_abs, SpdFactor};
use crate::reduce::chunked_reduce;
use accum::{dependent_group, dot, linear_predictors, scan_constant_groups};

/// Ŝ⁽⁰⁾, Ŝ⁽¹⁾, Ŝ⁽²⁾ at one time point, normalized by the dataset's n.
#[derive(Debug, Clone)]
pub struct RiskSums {
    pub t: f64,
    pub beta: DVector<f64>,
    pub s0: f64,
    pub s1: DVector<f64>,
    pub s2: DMatrix<f64>,
}

impl RiskSums {
    /// X̂(t, β) = Ŝ⁽¹⁾/Ŝ⁽⁰⁾.
    pub fn mean(&self) -> Result<DVector<f64>> {
        if !(self.s0 > 0.0) {
            return Err(CoxError::EmptyRiskSet { t: self.t });
        }
        Ok(&self.s1 / self.s0)
    }
}

/// Direct evaluation of the risk-set sums at `t`. `order` limits which of
/// s1/s2 are filled (higher orders are left at zero).
pub fn risk_sums(ds: &Dataset, beta: &DVector<f64>, t: f64, order: usize) -> RiskSums {
    let p = ds.p();
    let n = ds.n() as f64;
    let point = ds.path().at(t);
    let mut x = vec![0.0; p];
    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    for &j in &ds.sort_index()[ds.risk_start(t)..] {
        point.eval_into(ds.features(j), &mut x);
        let w = dot(&x, beta.as_slice()).exp();
        s0 += w;
        if order >= 1 {
            for a in 0..p {
                s1[a] += w * x[a];
                if order >= 2 {
                    for b in 0..p {
                        s2[(a, b)] += w * x[a] * x[b];
                    }
                }
            }
        }
    }
    RiskSums { t, beta: beta.clone(), s0: s0 / n, s1: s1 / n, s2: s2 / n }
}

/// Log partial likelihood with (optionally) its gradient and negative Hessian.
#[derive(Debug, Clone)]
pub struct PartialLikelihood {
    pub loglik: f64,
    pub score: DVector<f64>,
    pub information: DMatrix<f64>,
}

struct Totals {
    loglik: f64,
    score: Vec<f64>,
    info: Vec<f64>,
}

impl Totals {
    fn new(p: usize) -> Self {
        Self { loglik: 0.0, score: vec![0.0; p], info: vec![0.0; p * p] }
    }

    fn merge(mut self, other: Totals) -> Totals {
        self.loglik += other.loglik;
        self.score.iter_mut().zip(other.score).for_each(|(a, b)| *a += b);
        self.info.iter_mut().zip(other.info).for_each(|(a, b)| *a += b);
        self
    }
}

// event groups per parallel chunk for time-dependent passes
const GROUP_CHUNK: usize = 8;

/// Evaluates l(β) and, for `order ≥ 1` / `order ≥ 2`, Û(β) and Σ̂(β).
pub fn evaluate(ds: &Dataset, beta: &DVector<f64>, order: usize) -> Result<PartialLikelihood> {
    let p = ds.p();
    if beta.len() != p {
        return Err(CoxError::DimensionMismatch { expected: p, found: beta.len() });
    }
    let b = beta.as_slice();
    let totals = if ds.is_time_dependent() {
        let groups = ds.event_groups();
        chunked_reduce(
            groups.len(),
            GROUP_CHUNK,
            |range| {
                let mut t = Totals::new(p);
                let mut ex = Vec::new();
                let mut ee = Vec::new();
                let mut mean = vec![0.0; p];
                for g in &groups[range] {
                    let acc = dependent_group(ds, b, g, order, &mut ex, &mut ee);
                    let d = g.events as f64;
                    t.loglik += ee.iter().sum::<f64>() - d * acc.ln_s0();
                    if order >= 1 {
                        acc.mean_into(&mut mean);
                        for (k, s) in t.score.iter_mut().enumerate() {
                            let xs: f64 = (0..g.events).map(|e| ex[e * p + k]).sum();
                            *s += xs - d * mean[k];
                        }
                    }
                    if order >= 2 {
                        acc.add_covariance(&mean, d, &mut t.info);
                    }
                }
                t
            },
            Totals::merge,
        )
        .unwrap_or_else(|| Totals::new(p))
    } else {
        let eta = linear_predictors(ds, b);
        let sort = ds.sort_index();
        let mut t = Totals::new(p);
        let mut mean = vec![0.0; p];
        scan_constant_groups(ds, &eta, order, |_, g, acc| {
            let d = g.events as f64;
            let members = &sort[g.start..g.start + g.events];
            t.loglik += members.iter().map(|&i| eta[i]).sum::<f64>() - d * acc.ln_s0();
            if order >= 1 {
                acc.mean_into(&mut mean);
                for (k, s) in t.score.iter_mut().enumerate() {
                    let xs: f64 = members.iter().map(|&i| ds.features(i)[k]).sum();
                    *s += xs - d * mean[k];
                }
            }
            if order >= 2 {
                acc.add_covariance(&mean, d, &mut t.info);
            }
        });
        t
    };

    let n = ds.n() as f64;
    let loglik = totals.loglik / n;
    if !loglik.is_finite() || totals.score.iter().any(|v| !v.is_finite()) {
        return Err(CoxError::NonFiniteValue("partial likelihood"));
    }
    Ok(PartialLikelihood {
        loglik,
        score: DVector::from_vec(totals.score) / n,
        information: DMatrix::from_row_slice(p, p, &totals.info) / n,
    })
}

pub fn log_partial_likelihood(ds: &Dataset, beta: &DVector<f64>) -> Result<f64> {
    Ok(evaluate(ds, beta, 0)?.loglik)
}

pub fn score(ds: &Dataset, beta: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(evaluate(ds, beta, 1)?.score)
}

pub fn information(ds: &Dataset, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(evaluate(ds, beta, 2)?.information)
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Convergence threshold on ‖Û(β)‖∞.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50, max_halvings: 20 }
    }
}

/// Partial likelihood fit on one dataset (whole data or a subsample).
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    /// Σ̂(β̂), per-subject scale.
    pub information: DMatrix<f64>,
    /// (n·Σ̂(β̂))⁻¹ with n the fitted dataset's size.
    pub variance: DMatrix<f64>,
    pub n_iter: usize,
    pub converged: bool,
    pub final_score_norm: f64,
    /// n⁻¹-normalized log partial likelihood at β̂.
    pub loglik: f64,
    pub n: usize,
    pub events: usize,
}

impl FitResult {
    pub fn standard_errors(&self) -> DVector<f64> {
        self.variance.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

/// Newton–Raphson with step halving on the log partial likelihood.
///
/// Returns a result with `converged == false` when `max_iter` is exhausted.
pub fn newton_raphson_fit(ds: &Dataset, init: &DVector<f64>, opts: &NewtonOptions) -> Result<FitResult> {
    let events = ds.n_events();
    if events == 0 {
        return Err(CoxError::TooFewEvents { events, required: 1 });
    }
    let mut beta = init.clone();
    let mut cur = evaluate(ds, &beta, 2)?;
    let mut n_iter = 0;
    let converged = loop {
        if max_abs(&cur.score) <= opts.tol {
            break true;
        }
        if n_iter >= opts.max_iter {
            break false;
        }
        let mut step = SpdFactor::new(&cur.information)?.solve(&cur.score);
        let slack = 1e-12 * (1.0 + cur.loglik.abs());
        let mut halvings = 0;
        let next = loop {
            let cand = &beta + &step;
            match evaluate(ds, &cand, 2) {
                Ok(ev) if ev.loglik >= cur.loglik - slack || halvings >= opts.max_halvings => {
                    break Some((cand, ev))
                }
                Err(_) if halvings >= opts.max_halvings => break None,
                _ => {
                    step *= 0.5;
                    halvings += 1;
                }
            }
        };
        let Some((cand, ev)) = next else {
            return Err(CoxError::NonFiniteValue("Newton step"));
        };
        beta = cand;
        cur = ev;
        n_iter += 1;
    };

    let n = ds.n();
    let variance = match SpdFactor::new(&cur.information) {
        Ok(f) => f.inverse() / n as f64,
        Err(e) if converged => return Err(e),
        Err(_) => DMatrix::from_element(ds.p(), ds.p(), f64::NAN),
    };
    Ok(FitResult {
        beta_hat: beta,
        final_score_norm: max_abs(&cur.score),
        information: cur.information,
        variance,
        n_iter,
        converged,
        loglik: cur.loglik,
        n,
        events,
    })
}
