//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use mcox_core::data::{CovariatePathSpec, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nelder–Mead maximizer with restarts. Uses only function values.
pub fn nelder_mead_max(f: impl Fn(&[f64]) -> f64, start: &[f64], step: f64, ftol: f64) -> Vec<f64> {
    let mut best = start.to_vec();
    let mut scale = step;
    for _ in 0..12 {
        let next = nm_once(&f, &best, scale, ftol, 20_000);
        let moved = next.iter().zip(&best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        best = next;
        if moved < 1e-10 {
            break;
        }
        scale = (moved * 2.0).max(1e-6);
    }
    best
}

fn nm_once(f: &impl Fn(&[f64]) -> f64, start: &[f64], step: f64, ftol: f64, max_eval: usize) -> Vec<f64> {
    let k = start.len();
    let neg = |x: &[f64]| -f(x);
    let mut pts: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..k {
        let mut p = start.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| neg(p)).collect();
    let mut evals = k + 1;
    while evals < max_eval {
        let mut order: Vec<usize> = (0..=k).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = vals[k] - vals[0];
        let size = pts[1..].iter().flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        if spread <= ftol * (1.0 + vals[0].abs()) && size < 1e-9 {
            break;
        }
        let centroid: Vec<f64> = (0..k).map(|j| pts[..k].iter().map(|p| p[j]).sum::<f64>() / k as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..k).map(|j| centroid[j] + t * (pts[k][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = neg(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = neg(&xe);
            evals += 1;
            if fe < fr {
                pts[k] = xe;
                vals[k] = fe;
            } else {
                pts[k] = xr;
                vals[k] = fr;
            }
        } else if fr < vals[k - 1] {
            pts[k] = xr;
            vals[k] = fr;
        } else {
            let xc = if fr < vals[k] { along(-0.5) } else { along(0.5) };
            let fc = neg(&xc);
            evals += 1;
            if fc < vals[k].min(fr) {
                pts[k] = xc;
                vals[k] = fc;
            } else {
                for i in 1..=k {
                    pts[i] = (0..k).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
                    vals[i] = neg(&pts[i]);
                }
                evals += k;
            }
        }
    }
    let best = (0..=k).min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap()).unwrap();
    pts[best].clone()
}

/// Small Cox-like dataset with coarse times (ties) and random censoring.
pub fn tied_instance(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut time = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    for i in 0..n {
        let eta: f64 = (0..p).map(|j| beta[j] * features[i * p + j]).sum();
        let t = -(1.0 - rng.random::<f64>()).ln() * (-eta).exp();
        let c = rng.random_range(0.0..2.5);
        // round to a grid of 0.05 so tied times are common
        time.push((t.min(c) * 20.0).round() / 20.0);
        status.push(t < c);
    }
    Dataset::new(time, status, features, p, CovariatePathSpec::Constant).unwrap()
}
