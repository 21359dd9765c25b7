use mcox_core::cox::{breslow_baseline, risk_sums};
use mcox_core::moments::{build_user_linear_moment, whole_data_mean};
use mcox_sim::{generate_dataset, generate_with_failure_times, CovariateKind, DgpConfig};
use nalgebra::{DMatrix, DVector};

fn ti(n: usize, seed: u64) -> DgpConfig {
    DgpConfig::new(n, CovariateKind::TimeIndependent, seed)
}

#[test]
fn null_effects_give_unit_exponential_failure_times() {
    let mut cfg = ti(10_000, 41);
    cfg.beta0 = vec![0.0; 5];
    let mut t = generate_with_failure_times(&cfg).unwrap().failure_times;
    t.sort_by(f64::total_cmp);
    let n = t.len() as f64;
    let d = t
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x).exp();
            f64::max((i as f64 + 1.0) / n - f, f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    // asymptotic 1% critical value of the one-sample Kolmogorov–Smirnov statistic
    let critical = 1.6276 / n.sqrt();
    assert!(d < critical, "D = {d}, critical {critical}");
}

#[test]
fn zero_drift_reproduces_time_independent_times() {
    let a = generate_with_failure_times(&ti(5000, 7)).unwrap();
    let mut cfg = DgpConfig::new(5000, CovariateKind::TimeDependent, 7);
    cfg.eps_var = 0.0;
    let b = generate_with_failure_times(&cfg).unwrap();
    for (x, y) in a.failure_times.iter().zip(&b.failure_times) {
        assert!((x - y).abs() <= 1e-9 * x.max(1.0));
    }
    assert_eq!(a.dataset.statuses(), b.dataset.statuses());
}

#[test]
fn time_dependent_censoring_is_reported() {
    let sim = generate_with_failure_times(&DgpConfig::new(20_000, CovariateKind::TimeDependent, 3)).unwrap();
    let frac = sim.censoring_fraction();
    let never = sim.failure_times.iter().filter(|t| t.is_infinite()).count();
    println!("time-dependent censoring fraction {frac:.4}, {never} subjects with bounded hazard");
    assert!(frac > 0.0 && frac < 1.0);
    let ti_frac = generate_with_failure_times(&ti(20_000, 3)).unwrap().censoring_fraction();
    println!("time-independent censoring fraction {ti_frac:.4}");
}

#[test]
fn breslow_tracks_unit_baseline_at_last_event() {
    let cfg = ti(10_000, 11);
    let ds = generate_dataset(&cfg).unwrap();
    let bh = breslow_baseline(&ds, &DVector::from_vec(cfg.beta0.clone())).unwrap();
    let t_max = *bh.times.last().unwrap();
    let lam = bh.cumulative(t_max);
    assert!((lam - t_max).abs() <= 0.05 * t_max, "Λ̂({t_max}) = {lam}");
}

/// Probability of an observed event, E_X[1 − (1 − e^{−c₀w})/(c₀w)] with
/// w = e^{β₀ᵀX}, estimated from covariates of an independent sample.
fn event_probability(cfg: &DgpConfig, seed: u64) -> f64 {
    let ds = generate_dataset(&cfg.with_seed(seed)).unwrap();
    let c0 = cfg.c0;
    let total: f64 = (0..ds.n())
        .map(|i| {
            let w = ds.features(i).iter().zip(&cfg.beta0).map(|(x, b)| x * b).sum::<f64>().exp();
            1.0 - (1.0 - (-c0 * w).exp()) / (c0 * w)
        })
        .sum();
    total / ds.n() as f64
}

#[test]
fn status_moment_mean_matches_event_probability() {
    let cfg = ti(100_000, 5);
    let ds = generate_dataset(&cfg).unwrap();
    let mut m = DMatrix::zeros(1, 7);
    m[(0, 1)] = 1.0;
    let mu = whole_data_mean(&ds, &build_user_linear_moment(m).unwrap()).unwrap().mu_hat[0];
    let oracle = event_probability(&ti(200_000, 0), 99);
    assert!((mu - oracle).abs() <= 0.01, "μ̂ = {mu}, oracle {oracle}");
}

/// max over a time grid of the risk-set sums' deviation from a reference.
fn sup_deviation(cfg: &DgpConfig, reference: &[(f64, DMatrix<f64>)], grid: &[f64]) -> f64 {
    let ds = generate_dataset(cfg).unwrap();
    let beta = DVector::from_vec(cfg.beta0.clone());
    grid.iter()
        .zip(reference)
        .map(|(&t, (s0, s12))| {
            let rs = risk_sums(&ds, &beta, t, 2);
            let p = cfg.p;
            let d0 = (rs.s0 - s0).abs();
            let d1 = (&rs.s1 - s12.view((0, 0), (p, 1))).norm();
            let d2 = (&rs.s2 - s12.view((0, 1), (p, p))).norm();
            d0.max(d1).max(d2)
        })
        .fold(0.0, f64::max)
}

/// Reference risk-set sums from a direct loop over a large sample; the
/// returned matrix holds s1 in column 0 and s2 in columns 1..=p.
fn reference_sums(cfg: &DgpConfig, grid: &[f64]) -> Vec<(f64, DMatrix<f64>)> {
    let ds = generate_dataset(cfg).unwrap();
    let p = cfg.p;
    let n = ds.n() as f64;
    grid.iter()
        .map(|&t| {
            let mut s0 = 0.0;
            let mut m = DMatrix::zeros(p, p + 1);
            for i in 0..ds.n() {
                if ds.time(i) < t {
                    continue;
                }
                let x = ds.features(i);
                let w = x.iter().zip(&cfg.beta0).map(|(a, b)| a * b).sum::<f64>().exp();
                s0 += w;
                for a in 0..p {
                    m[(a, 0)] += w * x[a];
                    for b in 0..p {
                        m[(a, b + 1)] += w * x[a] * x[b];
                    }
                }
            }
            (s0 / n, m / n)
        })
        .collect()
}

#[test]
fn risk_sum_error_halves_when_n_quadruples() {
    let grid: Vec<f64> = (1..=12).map(|k| 0.25 * k as f64).collect();
    let reference = reference_sums(&ti(1_000_000, 987_654), &grid);
    let mean_sup = |n: usize| -> f64 {
        let reps = 20;
        (0..reps).map(|s| sup_deviation(&ti(n, 100 + s), &reference, &grid)).sum::<f64>() / reps as f64
    };
    let (small, large) = (mean_sup(10_000), mean_sup(40_000));
    let ratio = small / large;
    assert!((2.0 / 1.5..=2.0 * 1.5).contains(&ratio), "sup deviations {small} → {large}, ratio {ratio}");
}
