mod common;

use mcox_core::cox::{newton_raphson_fit, NewtonOptions};
use mcox_core::data::{CovariatePathSpec, Dataset};
use mcox_core::subsample::{
    bernoulli_subsample, fit_uniform, poisson_subsample, subset, SubsampleIndex, SubsamplePlan,
};
use nalgebra::DVector;

#[test]
fn realized_size_centres_on_r() {
    let n = 1_000_000;
    let total: usize = (0..100)
        .map(|seed| poisson_subsample(n, &SubsamplePlan::new(1000, seed)).unwrap().realized_size())
        .sum();
    let mean = total as f64 / 100.0;
    assert!((mean - 1000.0).abs() <= 3.0 * 1000f64.sqrt(), "mean {mean}");
}

#[test]
fn realized_size_mean_and_variance_match_binomial() {
    let (n, rate) = (20_000usize, 0.05);
    let sizes: Vec<f64> = (0..1000)
        .map(|seed| bernoulli_subsample(n, rate, seed, 0).unwrap().realized_size() as f64)
        .collect();
    let m = sizes.iter().sum::<f64>() / 1000.0;
    let v = sizes.iter().map(|s| (s - m).powi(2)).sum::<f64>() / 999.0;
    let mu = n as f64 * rate;
    let var = mu * (1.0 - rate);
    // standard errors of the sample mean and (normal-theory) sample variance
    assert!((m - mu).abs() <= 4.0 * (var / 1000.0).sqrt(), "mean {m}");
    assert!((v - var).abs() <= 4.0 * var * (2.0 / 999.0f64).sqrt(), "var {v}");
}

#[test]
fn concatenated_dataset_prefix_is_consistent() {
    let plan = SubsamplePlan::new(50, 31);
    let a = bernoulli_subsample(7_000, plan.rate(20_000), plan.seed, 0).unwrap();
    let b = bernoulli_subsample(20_000, plan.rate(20_000), plan.seed, 0).unwrap();
    let head: Vec<usize> = b.indices.into_iter().filter(|&i| i < 7_000).collect();
    assert_eq!(a.indices, head);
}

#[test]
fn subset_fit_matches_hand_built_dataset() {
    let ds = common::tied_instance(5, 300, 2);
    let idx = SubsampleIndex { indices: vec![3, 10, 11, 40, 41, 42, 77, 120, 121, 200, 250, 299], parent_n: 300 };
    let sub = subset(&ds, &idx).unwrap();
    let mut time = Vec::new();
    let mut status = Vec::new();
    let mut feats = Vec::new();
    for &i in &idx.indices {
        time.push(ds.time(i));
        status.push(ds.status(i));
        feats.extend_from_slice(ds.features(i));
    }
    let hand = Dataset::new(time, status, feats, 2, CovariatePathSpec::Constant).unwrap();
    let opts = NewtonOptions::default();
    let a = newton_raphson_fit(&sub, &DVector::zeros(2), &opts).unwrap();
    let b = newton_raphson_fit(&hand, &DVector::zeros(2), &opts).unwrap();
    assert!((a.beta_hat - b.beta_hat).amax() <= 1e-12);
}

#[test]
fn single_event_subset() {
    let ds = common::tied_instance(6, 50, 1);
    let i = (0..50).find(|&i| ds.status(i)).unwrap();
    let sub = subset(&ds, &SubsampleIndex { indices: vec![i], parent_n: 50 }).unwrap();
    assert_eq!(sub.n(), 1);
    assert_eq!(sub.n_events(), 1);
}

#[test]
fn full_rate_uniform_fit_is_whole_data_fit() {
    let ds = common::tied_instance(7, 400, 3);
    let opts = NewtonOptions::default();
    let (fit, idx) = fit_uniform(&ds, &SubsamplePlan::new(400, 1), &opts).unwrap();
    assert_eq!(idx.realized_size(), 400);
    let whole = newton_raphson_fit(&ds, &DVector::zeros(3), &opts).unwrap();
    assert_eq!(fit.beta_hat, whole.beta_hat);
    assert_eq!(fit.variance, whole.variance);
}
