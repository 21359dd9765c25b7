//! Small dense helpers on top of nalgebra for the p×p and q×q systems that
//! appear in the estimators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CoxError, Result};

/// Relative pivot floor for treating an information matrix as singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Cholesky factor of a symmetric positive definite matrix, with the pivot
/// check used for information matrices.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    l: DMatrix<f64>,
}

impl SpdFactor {
    /// Factors `a`, failing with `SingularInformation` when a pivot falls
    /// below `PIVOT_TOL` times the largest diagonal entry.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let p = a.nrows();
        assert_eq!(p, a.ncols());
        let max_diag = (0..p).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
        let threshold = PIVOT_TOL * max_diag;
        let mut l = DMatrix::<f64>::zeros(p, p);
        for j in 0..p {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > threshold) || !d.is_finite() {
                return Err(CoxError::SingularInformation { pivot: d, threshold });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..p {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let p = self.l.nrows();
        let mut y = b.clone();
        for i in 0..p {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..p).rev() {
            let mut s = y[i];
            for k in (i + 1)..p {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            out.set_column(j, &self.solve(&b.column(j).into_owned()));
        }
        out
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let p = self.l.nrows();
        symmetrize(self.solve_matrix(&DMatrix::identity(p, p)))
    }
}

/// `(m + mᵀ)/2`.
pub fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Symmetric pseudo-inverse: eigenvalues whose magnitude is below
/// `rel_tol * max(|λ|max, scale)` are dropped. Returns the inverse and the
/// retained rank.
pub fn sym_pinv(a: &DMatrix<f64>, rel_tol: f64, scale: f64) -> (DMatrix<f64>, usize) {
    spectral_map(a, rel_tol, scale, |lam| 1.0 / lam)
}

/// Symmetric pseudo-inverse square root of a PSD matrix, same truncation rule
/// as [`sym_pinv`].
pub fn sym_pinv_sqrt(a: &DMatrix<f64>, rel_tol: f64, scale: f64) -> (DMatrix<f64>, usize) {
    spectral_map(a, rel_tol, scale, |lam| if lam > 0.0 { 1.0 / lam.sqrt() } else { 0.0 })
}

/// Symmetric square root of a PSD matrix (negative eigenvalues clipped).
pub fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(a, 0.0, 0.0, |lam| lam.max(0.0).sqrt()).0
}

fn spectral_map(
    a: &DMatrix<f64>,
    rel_tol: f64,
    scale: f64,
    f: impl Fn(f64) -> f64,
) -> (DMatrix<f64>, usize) {
    let n = a.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), 0);
    }
    let eig = SymmetricEigen::new(symmetrize(a.clone()));
    let max_abs = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = rel_tol * max_abs.max(scale);
    let mut rank = 0;
    let mut out = DMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() <= cut || lam == 0.0 {
            continue;
        }
        rank += 1;
        let v = eig.eigenvectors.column(k);
        out += (v * v.transpose()) * f(lam);
    }
    (symmetrize(out), rank)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(a.clone()))
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v))
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
