//! With the exact efficient score as moment, the corrected subsample
//! estimator should be as variable as the whole-data fit.

use mcox_core::cox::{newton_raphson_fit, NewtonOptions, ScoreReference};
use mcox_core::mcox::{compute_g2, compute_omega_blocks, mcox_estimate};
use mcox_core::moments::{whole_data_mean, MomentSpec};
use mcox_core::subsample::{fit_subsample, poisson_subsample, subset, SubsamplePlan};
use mcox_sim::{generate_dataset, CovariateKind, DgpConfig};
use nalgebra::DVector;
use rayon::prelude::*;

fn trace_of_covariance(rows: &[DVector<f64>]) -> f64 {
    let m = rows.len() as f64;
    let p = rows[0].len();
    let mean = rows.iter().fold(DVector::zeros(p), |a, b| a + b) / m;
    rows.iter().map(|b| (b - &mean).norm_squared()).sum::<f64>() / (m - 1.0)
}

#[test]
fn exact_efficient_score_matches_whole_data_variance() {
    let base = DgpConfig::new(100_000, CovariateKind::TimeIndependent, 31_337);
    let beta0 = DVector::from_vec(base.beta0.clone());
    let reference = generate_dataset(&DgpConfig::new(1_000_000, CovariateKind::TimeIndependent, 4_242)).unwrap();
    let spec = MomentSpec::EstimatedOptimal(ScoreReference::build(&reference, &beta0).unwrap());
    drop(reference);
    let opts = NewtonOptions::default();
    let pairs: Vec<(DVector<f64>, DVector<f64>)> = (0..300u64)
        .into_par_iter()
        .map(|rep| {
            let ds = generate_dataset(&base.with_seed(base.seed + rep)).unwrap();
            let whole = newton_raphson_fit(&ds, &DVector::zeros(5), &opts).unwrap();
            let plan = SubsamplePlan::new(1000, rep);
            let sub = subset(&ds, &poisson_subsample(ds.n(), &plan).unwrap()).unwrap();
            let uni = fit_subsample(&sub, &opts).unwrap();
            let mu = whole_data_mean(&ds, &spec).unwrap();
            let g2 = compute_g2(&sub, &spec, &mu).unwrap();
            let blocks = compute_omega_blocks(&sub, &uni.beta_hat, &spec, ds.n()).unwrap();
            let res = mcox_estimate(&uni, &blocks, &g2, None).unwrap();
            assert!(!res.fallback);
            (whole.beta_hat, res.beta_mcox)
        })
        .collect();
    let (whole, mcox): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let ratio = trace_of_covariance(&mcox) / trace_of_covariance(&whole);
    assert!((ratio - 1.0).abs() <= 0.2, "trace ratio {ratio}");
}
