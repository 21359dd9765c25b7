//! Weibull accelerated failure time model, log T = a + γᵀx + σW with W
//! standard (minimum) extreme value, fitted by maximum likelihood under
//! right censoring.
//!
//! With z = (log y − a − γᵀx)/σ and s = log σ, each subject contributes
//! ℓ = Δ(z − s) − eᶻ (dropping the −Δ log y Jacobian, which is free of the
//! parameters).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CoxError, Result};

/// Floor applied to observed times before taking logs.
pub const MIN_TIME: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct WeibullAft {
    pub intercept: f64,
    pub gamma: DVector<f64>,
    pub log_scale: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct AftOptions {
    /// Convergence threshold on the per-subject mean gradient, sup norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AftOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200 }
    }
}

/// Per-subject standardized residual z and scale σ.
#[inline]
fn z_of(theta: &[f64], x: &[f64], y: f64) -> (f64, f64) {
    let p = x.len();
    let sigma = theta[p + 1].exp();
    let lin = theta[0] + theta[1..=p].iter().zip(x).map(|(g, v)| g * v).sum::<f64>();
    ((y.max(MIN_TIME).ln() - lin) / sigma, sigma)
}

/// Log-likelihood, gradient and Hessian in θ = (a, γ, log σ), summed over
/// subjects. `xs` is row-major n×p.
pub fn loglik_derivs(
    theta: &[f64],
    xs: &[f64],
    y: &[f64],
    delta: &[bool],
    p: usize,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let k = p + 2;
    let mut ll = 0.0;
    let mut g = DVector::zeros(k);
    let mut h = DMatrix::zeros(k, k);
    let mut w = vec![0.0; p + 1];
    for i in 0..y.len() {
        let x = &xs[i * p..(i + 1) * p];
        let d = if delta[i] { 1.0 } else { 0.0 };
        let (z, sigma) = z_of(theta, x, y[i]);
        let ez = z.exp();
        ll += d * (z - theta[p + 1]) - ez;
        w[0] = 1.0;
        w[1..].copy_from_slice(x);
        let r = (ez - d) / sigma;
        for j in 0..=p {
            g[j] += w[j] * r;
            for l in 0..=p {
                h[(j, l)] -= w[j] * w[l] * ez / (sigma * sigma);
            }
            h[(j, p + 1)] += w[j] * (-z * ez / sigma - r);
        }
        g[p + 1] += -d + z * (ez - d);
        h[(p + 1, p + 1)] += -z * (ez - d) - z * z * ez;
    }
    for j in 0..=p {
        h[(p + 1, j)] = h[(j, p + 1)];
    }
    (ll, g, h)
}

/// Ascent direction from the Hessian: eigenvalues of −H are replaced by
/// their absolute values, and those near zero (collinear columns) dropped.
fn ascent_step(g: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(-h);
    let top = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = 1e-12 * top.max(f64::MIN_POSITIVE);
    let proj = eig.eigenvectors.transpose() * g;
    let scaled = DVector::from_iterator(
        proj.len(),
        proj.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| {
            if l.abs() > cut {
                c / l.abs()
            } else {
                0.0
            }
        }),
    );
    &eig.eigenvectors * scaled
}

impl WeibullAft {
    /// Maximum likelihood fit from covariates `xs` (row-major n×p).
    pub fn fit(xs: &[f64], y: &[f64], delta: &[bool], p: usize, opts: &AftOptions) -> Result<Self> {
        let n = y.len();
        let events = delta.iter().filter(|&&d| d).count();
        if events < p + 2 {
            return Err(CoxError::TooFewEvents { events, required: p + 2 });
        }
        let mean_log = y.iter().map(|v| v.max(MIN_TIME).ln()).sum::<f64>() / n as f64;
        let mut theta = vec![0.0; p + 2];
        theta[0] = mean_log;
        let (mut ll, mut g, mut h) = loglik_derivs(&theta, xs, y, delta, p);
        let nf = n as f64;
        for iter in 0..opts.max_iter {
            if g.amax() / nf <= opts.tol {
                return Ok(Self::from_theta(&theta, p, iter));
            }
            let mut step = ascent_step(&g, &h);
            let mut accepted = false;
            for _ in 0..40 {
                let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
                let (cl, cg, ch) = loglik_derivs(&cand, xs, y, delta, p);
                if cl.is_finite() && cl >= ll - 1e-12 * (1.0 + ll.abs()) {
                    theta = cand;
                    (ll, g, h) = (cl, cg, ch);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if g.amax() / nf <= opts.tol {
            return Ok(Self::from_theta(&theta, p, opts.max_iter));
        }
        Err(CoxError::NotConverged { what: "Weibull AFT fit", iterations: opts.max_iter })
    }

    fn from_theta(theta: &[f64], p: usize, iterations: usize) -> Self {
        Self {
            intercept: theta[0],
            gamma: DVector::from_column_slice(&theta[1..=p]),
            log_scale: theta[p + 1],
            iterations,
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        let mut t = vec![self.intercept];
        t.extend(self.gamma.iter());
        t.push(self.log_scale);
        t
    }

    pub fn p(&self) -> usize {
        self.gamma.len()
    }

    /// Score of γ for one subject: x(eᶻ − Δ)/σ.
    pub fn gamma_score_into(&self, x: &[f64], y: f64, delta: bool, out: &mut [f64]) {
        let sigma = self.log_scale.exp();
        let lin = self.intercept + self.gamma.iter().zip(x).map(|(g, v)| g * v).sum::<f64>();
        let z = (y.max(MIN_TIME).ln() - lin) / sigma;
        let r = (z.exp() - if delta { 1.0 } else { 0.0 }) / sigma;
        for (o, v) in out.iter_mut().zip(x) {
            *o = v * r;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(n: usize, seed: u64, a: f64, gamma: &[f64], sigma: f64, censor: f64) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = gamma.len();
        let mut xs = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let e: f64 = -(1.0 - rng.random::<f64>()).ln();
            let t = (a + gamma.iter().zip(&x).map(|(g, v)| g * v).sum::<f64>() + sigma * e.ln()).exp();
            let c = rng.random_range(0.0..censor);
            xs.extend(x);
            y.push(t.min(c));
            d.push(t < c);
        }
        (xs, y, d)
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let (xs, y, d) = sample(40, 3, 0.2, &[0.5, -0.3], 0.8, 3.0);
        let theta = [0.1, 0.4, -0.2, -0.1];
        let (_, g, h) = loglik_derivs(&theta, &xs, &y, &d, 2);
        let eps = 1e-6;
        for j in 0..4 {
            let mut tp = theta;
            tp[j] += eps;
            let mut tm = theta;
            tm[j] -= eps;
            let (lp, gp, _) = loglik_derivs(&tp, &xs, &y, &d, 2);
            let (lm, gm, _) = loglik_derivs(&tm, &xs, &y, &d, 2);
            assert!(((lp - lm) / (2.0 * eps) - g[j]).abs() < 1e-5 * (1.0 + g[j].abs()));
            for k in 0..4 {
                let fd = (gp[k] - gm[k]) / (2.0 * eps);
                assert!((fd - h[(k, j)]).abs() < 1e-4 * (1.0 + h[(k, j)].abs()), "{j} {k}");
            }
        }
    }

    #[test]
    fn gamma_score_matches_closed_form() {
        let fit = WeibullAft { intercept: 0.3, gamma: DVector::from_vec(vec![0.5, -1.0]), log_scale: 0.2, iterations: 0 };
        let x = [0.4, 1.2];
        let y: f64 = 1.7;
        let mut out = [0.0; 2];
        fit.gamma_score_into(&x, y, true, &mut out);
        let sigma = 0.2f64.exp();
        let z = (y.ln() - 0.3 - 0.5 * 0.4 + 1.2) / sigma;
        for k in 0..2 {
            assert!((out[k] - x[k] * (z.exp() - 1.0) / sigma).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_design_still_converges() {
        // a duplicated column makes the Hessian singular
        let (base, y, d) = sample(500, 8, 0.0, &[0.7], 1.0, 4.0);
        let xs: Vec<f64> = base.iter().flat_map(|&v| [v, v, 0.0]).collect();
        let fit = WeibullAft::fit(&xs, &y, &d, 3, &AftOptions::default()).unwrap();
        assert!((fit.gamma[0] - fit.gamma[1]).abs() < 1e-8);
        assert!(fit.gamma[2].abs() < 1e-12);
    }
}
