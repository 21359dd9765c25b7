mod common;

use common::{nelder_mead_max, tied_instance};
use mcox_core::cox::{log_partial_likelihood, newton_raphson_fit, NewtonOptions};
use nalgebra::DVector;

#[test]
fn newton_matches_derivative_free_maximizer() {
    for seed in 0..20 {
        let ds = tied_instance(1000 + seed, 100, 3);
        let fit = newton_raphson_fit(&ds, &DVector::zeros(3), &NewtonOptions::default()).unwrap();
        assert!(fit.converged);
        let f = |b: &[f64]| log_partial_likelihood(&ds, &DVector::from_column_slice(b)).unwrap();
        let nm = nelder_mead_max(f, &[0.0; 3], 0.5, 1e-15);
        let diff = (fit.beta_hat - DVector::from_vec(nm)).amax();
        assert!(diff <= 1e-6, "seed {seed}: |Δβ| = {diff:e}");
    }
}
