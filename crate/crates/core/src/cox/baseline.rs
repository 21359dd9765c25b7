use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::accum::{dependent_group, dot, linear_predictors, scan_constant_groups};
use crate::data::{CovariatePathSpec, Dataset};
use crate::error::{CoxError, Result};

/// Breslow cumulative baseline hazard as a step function.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineHazard {
    pub times: Vec<f64>,
    pub increments: Vec<f64>,
}

impl BaselineHazard {
    /// Λ₀(t) = Σ_{tₖ ≤ t} dΛₖ.
    pub fn cumulative(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        self.increments[..k].iter().sum()
    }

    /// Running sums of the increments, aligned with `times`.
    pub fn cumulative_values(&self) -> Vec<f64> {
        self.increments
            .iter()
            .scan(0.0, |acc, &d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }
}

/// Per event time: the ratio S⁽¹⁾/S⁽⁰⁾ and the log of the unnormalized S⁽⁰⁾.
struct GroupSummary {
    mean: Vec<f64>,
    ln_s0: f64,
}

fn group_summaries(ds: &Dataset, beta: &[f64]) -> Vec<GroupSummary> {
    let p = ds.p();
    if ds.is_time_dependent() {
        ds.event_groups()
            .par_iter()
            .map(|g| {
                let (mut ex, mut ee) = (Vec::new(), Vec::new());
                let acc = dependent_group(ds, beta, g, 1, &mut ex, &mut ee);
                let mut mean = vec![0.0; p];
                acc.mean_into(&mut mean);
                GroupSummary { mean, ln_s0: acc.ln_s0() }
            })
            .collect()
    } else {
        let eta = linear_predictors(ds, beta);
        let mut out: Vec<Option<GroupSummary>> = (0..ds.event_groups().len()).map(|_| None).collect();
        scan_constant_groups(ds, &eta, 1, |gi, _, acc| {
            let mut mean = vec![0.0; p];
            acc.mean_into(&mut mean);
            out[gi] = Some(GroupSummary { mean, ln_s0: acc.ln_s0() });
        });
        out.into_iter().map(|s| s.expect("every group visited")).collect()
    }
}

fn check_beta(ds: &Dataset, beta: &DVector<f64>) -> Result<()> {
    if beta.len() != ds.p() {
        return Err(CoxError::DimensionMismatch { expected: ds.p(), found: beta.len() });
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(CoxError::NonFiniteValue("beta"));
    }
    Ok(())
}

/// Breslow increments dₖ / Σₗ I(Yₗ ≥ tₖ) exp(βᵀXₗ(tₖ)), without the 1/n factor.
pub fn breslow_baseline(ds: &Dataset, beta: &DVector<f64>) -> Result<BaselineHazard> {
    check_beta(ds, beta)?;
    if ds.n_events() == 0 {
        return Err(CoxError::TooFewEvents { events: 0, required: 1 });
    }
    let sums = group_summaries(ds, beta.as_slice());
    let groups = ds.event_groups();
    Ok(BaselineHazard {
        times: groups.iter().map(|g| g.time).collect(),
        increments: groups
            .iter()
            .zip(&sums)
            .map(|(g, s)| g.events as f64 * (-s.ln_s0).exp())
            .collect(),
    })
}

/// Mᵢ = Δᵢ − Σ_{tₖ ≤ Yᵢ} exp(βᵀXᵢ(tₖ)) dΛₖ, in input order.
pub fn martingale_residuals(
    ds: &Dataset,
    beta: &DVector<f64>,
    baseline: &BaselineHazard,
) -> Result<DVector<f64>> {
    check_beta(ds, beta)?;
    let b = beta.as_slice();
    let p = ds.p();
    let res: Vec<f64> = if ds.is_time_dependent() {
        (0..ds.n())
            .into_par_iter()
            .map_init(
                || vec![0.0; p],
                |x, i| {
                    let y = ds.time(i);
                    let k_end = baseline.times.partition_point(|&t| t <= y);
                    let mut comp = 0.0;
                    for k in 0..k_end {
                        ds.covariate_into(i, baseline.times[k], x);
                        comp += dot(x, b).exp() * baseline.increments[k];
                    }
                    f64::from(u8::from(ds.status(i))) - comp
                },
            )
            .collect()
    } else {
        let cum = baseline.cumulative_values();
        let eta = linear_predictors(ds, b);
        (0..ds.n())
            .map(|i| {
                let k = baseline.times.partition_point(|&t| t <= ds.time(i));
                let lam = if k == 0 { 0.0 } else { cum[k - 1] };
                f64::from(u8::from(ds.status(i))) - eta[i].exp() * lam
            })
            .collect()
    };
    Ok(DVector::from_vec(res))
}

/// Frozen risk-set summaries of a reference sample at a fixed β, used to
/// evaluate the plug-in efficient score
/// `ψ(Z) = Δ{X(Y) − x̄(Y)} − Σ_{tₖ ≤ Y} {X(tₖ) − x̄(tₖ)} exp(βᵀX(tₖ)) dΛₖ`
/// for records that need not belong to the reference sample.
///
/// `x̄` at an off-grid time is the value at the latest reference event time
/// not after it; queries earlier than every reference event time use the
/// first one.
#[derive(Debug, Clone)]
pub struct ScoreReference {
    beta: DVector<f64>,
    path: CovariatePathSpec,
    p: usize,
    times: Vec<f64>,
    xbar: Vec<f64>,
    dlam: Vec<f64>,
    cum_lam: Vec<f64>,
    cum_a: Vec<f64>,
}

impl ScoreReference {
    pub fn build(reference: &Dataset, beta: &DVector<f64>) -> Result<Self> {
        check_beta(reference, beta)?;
        let p = reference.p();
        if reference.n_events() == 0 {
            return Err(CoxError::TooFewEvents { events: 0, required: 1 });
        }
        let sums = group_summaries(reference, beta.as_slice());
        let groups = reference.event_groups();
        let k = groups.len();
        let mut xbar = Vec::with_capacity(k * p);
        let mut dlam = Vec::with_capacity(k);
        let mut cum_lam = vec![0.0; k + 1];
        let mut cum_a = vec![0.0; (k + 1) * p];
        for (i, (g, s)) in groups.iter().zip(&sums).enumerate() {
            let d = g.events as f64 * (-s.ln_s0).exp();
            xbar.extend_from_slice(&s.mean);
            dlam.push(d);
            cum_lam[i + 1] = cum_lam[i] + d;
            for a in 0..p {
                cum_a[(i + 1) * p + a] = cum_a[i * p + a] + s.mean[a] * d;
            }
        }
        Ok(Self {
            beta: beta.clone(),
            path: reference.path().clone(),
            p,
            times: groups.iter().map(|g| g.time).collect(),
            xbar,
            dlam,
            cum_lam,
            cum_a,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn path(&self) -> &CovariatePathSpec {
        &self.path
    }

    /// Reference event times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Breslow increments of the reference sample.
    pub fn increments(&self) -> &[f64] {
        &self.dlam
    }

    /// x̄ at reference event time `k`.
    pub fn mean_at(&self, k: usize) -> &[f64] {
        &self.xbar[k * self.p..(k + 1) * self.p]
    }

    /// Writes ψ for one record into `out`; `scratch` must have length p.
    pub fn contribution_into(
        &self,
        features: &[f64],
        y: f64,
        delta: bool,
        out: &mut [f64],
        scratch: &mut [f64],
    ) {
        let p = self.p;
        let b = self.beta.as_slice();
        let k_end = self.times.partition_point(|&t| t <= y);
        out.iter_mut().for_each(|o| *o = 0.0);
        if delta {
            self.path.at(y).eval_into(features, scratch);
            let mean = self.mean_at(k_end.saturating_sub(1));
            for a in 0..p {
                out[a] = scratch[a] - mean[a];
            }
        }
        if self.path.is_constant() {
            // Σₖ (x − x̄ₖ) e^{βᵀx} dΛₖ = e^{βᵀx} (x·Λ(Y) − A(Y))
            let w = dot(features, b).exp();
            let lam = self.cum_lam[k_end];
            let acc = &self.cum_a[k_end * p..(k_end + 1) * p];
            for a in 0..p {
                out[a] -= w * (features[a] * lam - acc[a]);
            }
        } else {
            for k in 0..k_end {
                self.path.at(self.times[k]).eval_into(features, scratch);
                let w = dot(scratch, b).exp() * self.dlam[k];
                let mean = self.mean_at(k);
                for a in 0..p {
                    out[a] -= w * (scratch[a] - mean[a]);
                }
            }
        }
    }

    /// ψ for record `i` of `ds`.
    pub fn contribution(&self, ds: &Dataset, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        let mut scratch = vec![0.0; self.p];
        self.contribution_into(ds.features(i), ds.time(i), ds.status(i), &mut out, &mut scratch);
        out
    }

    /// n×p matrix of ψ over every record of `ds`, rows in input order.
    pub fn contributions(&self, ds: &Dataset) -> Result<DMatrix<f64>> {
        if ds.p() != self.p {
            return Err(CoxError::DimensionMismatch { expected: self.p, found: ds.p() });
        }
        let p = self.p;
        let mut flat = vec![0.0; ds.n() * p];
        flat.par_chunks_mut(p).enumerate().for_each_init(
            || vec![0.0; p],
            |scratch, (i, row)| {
                self.contribution_into(ds.features(i), ds.time(i), ds.status(i), row, scratch);
            },
        );
        Ok(DMatrix::from_row_slice(ds.n(), p, &flat))
    }
}

/// Per-subject efficient-score contributions with `ds` as its own reference
/// sample. Column sums equal n·Û(β).
pub fn efficient_score_contributions(ds: &Dataset, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
    ScoreReference::build(ds, beta)?.contributions(ds)
}
