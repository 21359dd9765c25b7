//! Moment-assisted correction of the uniform-subsample fit.
//!
//! Given ψ̃ₖ (efficient-score contributions on the subsample at β̃_uni) and
//! moment values h(Zₖ), the estimator is
//! `β̃_MCox = β̃_uni − Σ̃⁻¹ Ω̃₁₂ Ω̃₂₂⁺ g̃₂` with `g̃₂ = r⁻¹Σₖ h(Zₖ) − μ̂`.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cox::{efficient_score_contributions, FitResult};
use crate::data::Dataset;
use crate::error::{CoxError, Result};
use crate::linalg::{min_eigenvalue, sym_pinv, sym_pinv_sqrt, symmetrize, SpdFactor};
use crate::moments::{whole_data_mean, MomentSpec, WholeDataMoment};

/// Relative eigenvalue cut for the pseudo-inverse of Ω̃₂₂.
pub const OMEGA22_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OmegaBlocks {
    pub omega11: DMatrix<f64>,
    pub omega12: DMatrix<f64>,
    pub omega22: DMatrix<f64>,
    /// 1 − r/n with the realized subsample size.
    pub finite_pop_factor: f64,
    pub realized_r: usize,
    /// (1 − r/n)·r⁻¹Σₖ‖h(Zₖ)‖², the floor against which Ω̃₂₂'s spectrum is
    /// judged degenerate.
    pub h_scale: f64,
}

/// g̃₂ = r⁻¹Σₖ h(Zₖ) − μ̂, averaging with the same pass as μ̂.
pub fn compute_g2(subsample: &Dataset, spec: &MomentSpec, mu_hat: &WholeDataMoment) -> Result<DVector<f64>> {
    let sub = whole_data_mean(subsample, spec)?;
    if sub.mu_hat.len() != mu_hat.mu_hat.len() {
        return Err(CoxError::DimensionMismatch { expected: mu_hat.mu_hat.len(), found: sub.mu_hat.len() });
    }
    Ok(sub.mu_hat - &mu_hat.mu_hat)
}

/// Ω̃ blocks from per-record score contributions `psi` (r×p) and moment
/// values `h` (r×q).
pub fn omega_from_parts(psi: &DMatrix<f64>, h: &DMatrix<f64>, parent_n: usize) -> Result<OmegaBlocks> {
    let r = psi.nrows();
    if r == 0 || h.nrows() != r {
        return Err(CoxError::DimensionMismatch { expected: r, found: h.nrows() });
    }
    if parent_n < r {
        return Err(CoxError::InvalidArgument(format!("subsample of {r} from {parent_n} records")));
    }
    let rf = r as f64;
    let f = 1.0 - rf / parent_n as f64;
    let mean = h.row_mean();
    let mut hc = h.clone();
    for mut row in hc.row_iter_mut() {
        row -= &mean;
    }
    let omega11 = symmetrize(psi.transpose() * psi / rf);
    let omega12 = psi.transpose() * &hc * (f / rf);
    let omega22 = symmetrize(hc.transpose() * &hc * (f / rf));
    let h_scale = f * h.iter().map(|v| v * v).sum::<f64>() / rf;
    Ok(OmegaBlocks { omega11, omega12, omega22, finite_pop_factor: f, realized_r: r, h_scale })
}

/// Ω̃ blocks on a subsample of a dataset with `parent_n` records.
pub fn compute_omega_blocks(
    subsample: &Dataset,
    beta_uni: &DVector<f64>,
    spec: &MomentSpec,
    parent_n: usize,
) -> Result<OmegaBlocks> {
    let events = subsample.n_events();
    if events < subsample.p() {
        return Err(CoxError::TooFewEvents { events, required: subsample.p() });
    }
    let psi = efficient_score_contributions(subsample, beta_uni)?;
    let h = spec.eval_all(subsample)?;
    omega_from_parts(&psi, &h, parent_n)
}

#[derive(Debug, Clone)]
pub struct McoxResult {
    pub beta_mcox: DVector<f64>,
    pub beta_uni: DVector<f64>,
    /// Plug-in V̂_h.
    pub variance: DMatrix<f64>,
    pub alpha: Option<f64>,
    pub g2_norm: f64,
    pub fallback: bool,
    /// Rank retained in the pseudo-inverse of Ω̃₂₂.
    pub omega22_rank: usize,
}

/// β̃_MCox and V̂_h.
///
/// V̂_h = r⁻¹ Σ̃^{-1/2} (I − P) Σ̃^{-1/2} with
/// P = Ω̃₁₁^{-1/2} Ω̃₁₂ Ω̃₂₂⁺ Ω̃₂₁ Ω̃₁₁^{-1/2}: the squared canonical
/// correlations between ψ̃ and h, shrunk by 1 − r/n. P lies between 0 and
/// (1 − r/n)·I, so V̂_h is PSD and never exceeds (rΣ̃)⁻¹. It coincides with
/// r⁻¹Σ̃⁻¹(Σ̃ − Ω̃₁₂Ω̃₂₂⁺Ω̃₂₁)Σ̃⁻¹ whenever Ω̃₁₁ = Σ̃.
///
/// When `alpha_mu` is given (the whole-data mean of the optimal moment),
/// α = μ̂ᵀ(Ω̃₁₁ + μ̂μ̂ᵀ)⁻¹μ̂ is reported.
pub fn mcox_estimate(
    fit: &FitResult,
    blocks: &OmegaBlocks,
    g2: &DVector<f64>,
    alpha_mu: Option<&DVector<f64>>,
) -> Result<McoxResult> {
    let p = fit.beta_hat.len();
    let q = g2.len();
    if blocks.omega12.shape() != (p, q) || blocks.omega22.shape() != (q, q) {
        return Err(CoxError::DimensionMismatch { expected: q, found: blocks.omega22.nrows() });
    }
    let sigma = SpdFactor::new(&fit.information)?;
    let r = blocks.realized_r as f64;
    let (omega22_pinv, rank) = sym_pinv(&blocks.omega22, OMEGA22_RTOL, blocks.h_scale);

    let (sigma_inv_sqrt, _) = sym_pinv_sqrt(&fit.information, 0.0, 0.0);
    let base = symmetrize(&sigma_inv_sqrt * &sigma_inv_sqrt / r);
    let (beta_mcox, variance, fallback) = if rank == 0 {
        (fit.beta_hat.clone(), base, true)
    } else {
        let step = sigma.solve(&(&blocks.omega12 * (&omega22_pinv * g2)));
        let (o11_is, _) = sym_pinv_sqrt(&blocks.omega11, 1e-12, 0.0);
        let a = &o11_is * &blocks.omega12;
        let proj = symmetrize(&a * &omega22_pinv * a.transpose());
        let core = DMatrix::identity(p, p) - proj;
        let v = symmetrize(&sigma_inv_sqrt * core * &sigma_inv_sqrt / r);
        (&fit.beta_hat - step, v, false)
    };

    let alpha = match alpha_mu {
        Some(mu) => Some(adaptive_alpha(&blocks.omega11, mu)?),
        None => None,
    };
    Ok(McoxResult {
        beta_mcox,
        beta_uni: fit.beta_hat.clone(),
        variance,
        alpha,
        g2_norm: g2.norm(),
        fallback,
        omega22_rank: rank,
    })
}

/// α = μᵀ(Ω̃₁₁ + μμᵀ)⁻¹μ, clamped to [0, 1] against rounding.
pub fn adaptive_alpha(omega11: &DMatrix<f64>, mu: &DVector<f64>) -> Result<f64> {
    let m = omega11 + mu * mu.transpose();
    let (inv, _) = sym_pinv(&m, 1e-14, 0.0);
    let a = mu.dot(&(inv * mu));
    if !a.is_finite() {
        return Err(CoxError::NonFiniteValue("adaptive step"));
    }
    Ok(a.clamp(0.0, 1.0))
}

/// One-step update β̃_uni + Σ̃⁻¹μ̂ from the whole-data mean of the efficient score.
pub fn oses_estimate(fit: &FitResult, mu_hat_psi: &WholeDataMoment) -> Result<DVector<f64>> {
    let sigma = SpdFactor::new(&fit.information)?;
    Ok(&fit.beta_hat + sigma.solve(&mu_hat_psi.mu_hat))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub std_error: f64,
}

/// Normal-theory intervals β̃ ± z·√diag(V), z the (1+level)/2 quantile.
pub fn wald_intervals(estimate: &DVector<f64>, variance: &DMatrix<f64>, level: f64) -> Result<Vec<Interval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CoxError::InvalidArgument(format!("confidence level {level} outside (0, 1)")));
    }
    let scale = variance.trace().abs().max(f64::MIN_POSITIVE);
    if min_eigenvalue(variance) < -1e-10 * scale || variance.iter().any(|v| !v.is_finite()) {
        return Err(CoxError::DegenerateVariance("variance matrix is not positive semidefinite".into()));
    }
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    Ok(estimate
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let se = variance[(k, k)].max(0.0).sqrt();
            Interval { estimate: b, lower: b - z * se, upper: b + z * se, std_error: se }
        })
        .collect())
}

/// Intervals for β̃_MCox; a fallback result has no usable moment variance.
pub fn mcox_intervals(result: &McoxResult, level: f64) -> Result<Vec<Interval>> {
    if result.fallback {
        return Err(CoxError::DegenerateVariance("moment was degenerate; estimate fell back to UNI".into()));
    }
    wald_intervals(&result.beta_mcox, &result.variance, level)
}
