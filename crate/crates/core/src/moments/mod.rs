//! Moment functions h(Z) and their whole-data averages.

mod weibull;

pub use weibull::{loglik_derivs as weibull_loglik, AftOptions, WeibullAft, MIN_TIME};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cox::ScoreReference;
use crate::data::Dataset;
use crate::error::{CoxError, Result};
use crate::reduce::{add_vecs, chunked_reduce, CHUNK};

/// A frozen moment function h: (Y, Δ, features) → ℝ^q.
#[derive(Debug, Clone)]
pub enum MomentSpec {
    /// h(Z) = M·(Y, Δ, features), M of shape q×(2+d).
    UserLinear { matrix: DMatrix<f64> },
    /// Plug-in efficient score from a pilot sample.
    EstimatedOptimal(ScoreReference),
    /// γ-score of a Weibull AFT fit, evaluated at X(0).
    AftScore(WeibullAft),
}

impl MomentSpec {
    pub fn q(&self) -> usize {
        match self {
            MomentSpec::UserLinear { matrix } => matrix.nrows(),
            MomentSpec::EstimatedOptimal(r) => r.p(),
            MomentSpec::AftScore(a) => a.p(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MomentSpec::UserLinear { .. } => "linear",
            MomentSpec::EstimatedOptimal(_) => "optimal",
            MomentSpec::AftScore(_) => "aft",
        }
    }

    /// Fails when `ds` cannot be fed to this moment.
    pub fn check_compatible(&self, ds: &Dataset) -> Result<()> {
        match self {
            MomentSpec::UserLinear { matrix } => {
                if matrix.ncols() != ds.feature_dim() + 2 {
                    return Err(CoxError::DimensionMismatch {
                        expected: ds.feature_dim() + 2,
                        found: matrix.ncols(),
                    });
                }
            }
            MomentSpec::EstimatedOptimal(r) => {
                if r.path() != ds.path() || r.p() != ds.p() {
                    return Err(CoxError::InvalidPath(
                        "moment reference was built for a different covariate path".into(),
                    ));
                }
            }
            MomentSpec::AftScore(a) => {
                if a.p() != ds.p() {
                    return Err(CoxError::DimensionMismatch { expected: a.p(), found: ds.p() });
                }
            }
        }
        Ok(())
    }

    /// h for record `i` of `ds`, written into `out` (length q). `scratch`
    /// must hold at least p values.
    pub fn eval_into(&self, ds: &Dataset, i: usize, out: &mut [f64], scratch: &mut [f64]) {
        let (f, y, delta) = (ds.features(i), ds.time(i), ds.status(i));
        match self {
            MomentSpec::UserLinear { matrix } => {
                let d = if delta { 1.0 } else { 0.0 };
                for (r, o) in out.iter_mut().enumerate() {
                    let mut s = matrix[(r, 0)] * y + matrix[(r, 1)] * d;
                    for (k, v) in f.iter().enumerate() {
                        s += matrix[(r, k + 2)] * v;
                    }
                    *o = s;
                }
            }
            MomentSpec::EstimatedOptimal(r) => r.contribution_into(f, y, delta, out, scratch),
            MomentSpec::AftScore(a) => {
                let x0 = &mut scratch[..ds.p()];
                ds.path().at(0.0).eval_into(f, x0);
                a.gamma_score_into(x0, y, delta, out);
            }
        }
    }

    pub fn eval(&self, ds: &Dataset, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.q()];
        let mut scratch = vec![0.0; ds.p()];
        self.eval_into(ds, i, &mut out, &mut scratch);
        out
    }

    /// n×q matrix of h over `ds`, rows in input order.
    pub fn eval_all(&self, ds: &Dataset) -> Result<DMatrix<f64>> {
        self.check_compatible(ds)?;
        let q = self.q();
        let p = ds.p();
        let mut flat = vec![0.0; ds.n() * q];
        if q > 0 {
            flat.par_chunks_mut(q).enumerate().for_each_init(
                || vec![0.0; p],
                |scratch, (i, row)| self.eval_into(ds, i, row, scratch),
            );
        }
        Ok(DMatrix::from_row_slice(ds.n(), q, &flat))
    }
}

/// Plug-in efficient score with `pilot` as reference sample at `beta`.
pub fn build_optimal_moment(pilot: &Dataset, beta: &DVector<f64>) -> Result<MomentSpec> {
    let events = pilot.n_events();
    if events < pilot.p() {
        return Err(CoxError::TooFewEvents { events, required: pilot.p() });
    }
    Ok(MomentSpec::EstimatedOptimal(ScoreReference::build(pilot, beta)?))
}

/// Weibull AFT fit on the pilot's X(0).
pub fn build_aft_moment(pilot: &Dataset, opts: &AftOptions) -> Result<MomentSpec> {
    let p = pilot.p();
    let mut xs = vec![0.0; pilot.n() * p];
    let point = pilot.path().at(0.0);
    for (i, row) in xs.chunks_mut(p).enumerate() {
        point.eval_into(pilot.features(i), row);
    }
    let fit = WeibullAft::fit(&xs, pilot.times(), pilot.statuses(), p, opts)?;
    Ok(MomentSpec::AftScore(fit))
}

pub fn build_user_linear_moment(matrix: DMatrix<f64>) -> Result<MomentSpec> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(CoxError::NonFiniteValue("moment matrix"));
    }
    if matrix.ncols() < 3 {
        return Err(CoxError::InvalidArgument(
            "moment matrix needs columns for time, status and at least one feature".into(),
        ));
    }
    Ok(MomentSpec::UserLinear { matrix })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WholeDataMoment {
    pub mu_hat: DVector<f64>,
    pub n_used: usize,
}

/// μ̂ = n⁻¹ Σᵢ h(Zᵢ) in one chunked pass with a fixed reduction order.
pub fn whole_data_mean(ds: &Dataset, spec: &MomentSpec) -> Result<WholeDataMoment> {
    spec.check_compatible(ds)?;
    let q = spec.q();
    let p = ds.p();
    let sum = chunked_reduce(
        ds.n(),
        CHUNK,
        |range| {
            let mut acc = vec![0.0; q];
            let mut h = vec![0.0; q];
            let mut scratch = vec![0.0; p];
            for i in range {
                spec.eval_into(ds, i, &mut h, &mut scratch);
                for (a, v) in acc.iter_mut().zip(&h) {
                    *a += v;
                }
            }
            acc
        },
        add_vecs,
    )
    .unwrap_or_else(|| vec![0.0; q]);
    let n = ds.n() as f64;
    let mu_hat = DVector::from_iterator(q, sum.into_iter().map(|s| s / n));
    if mu_hat.iter().any(|v| !v.is_finite()) {
        return Err(CoxError::NonFiniteValue("moment average"));
    }
    Ok(WholeDataMoment { mu_hat, n_used: ds.n() })
}
