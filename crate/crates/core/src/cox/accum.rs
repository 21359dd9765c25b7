//! Weighted risk-set sums with a running max shift.

use crate::data::{Dataset, EventGroup};

/// Σ w·x^{⊗l} over a risk set with w = exp(η − m), where m is the running
/// maximum of η seen so far. All stored sums share the factor exp(−m).
#[derive(Debug, Clone)]
pub(crate) struct RiskAccumulator {
    p: usize,
    order: usize,
    m: f64,
    s0: f64,
    s1: Vec<f64>,
    // upper triangle, row-major in a full p×p buffer
    s2: Vec<f64>,
}

impl RiskAccumulator {
    pub fn new(p: usize, order: usize) -> Self {
        Self {
            p,
            order,
            m: f64::NEG_INFINITY,
            s0: 0.0,
            s1: if order >= 1 { vec![0.0; p] } else { Vec::new() },
            s2: if order >= 2 { vec![0.0; p * p] } else { Vec::new() },
        }
    }

    #[inline]
    pub fn add(&mut self, x: &[f64], eta: f64) {
        if eta > self.m {
            if self.s0 > 0.0 {
                let f = (self.m - eta).exp();
                self.s0 *= f;
                self.s1.iter_mut().for_each(|v| *v *= f);
                self.s2.iter_mut().for_each(|v| *v *= f);
            }
            self.m = eta;
        }
        let w = (eta - self.m).exp();
        self.s0 += w;
        if self.order >= 1 {
            for (s, &xi) in self.s1.iter_mut().zip(x) {
                *s += w * xi;
            }
        }
        if self.order >= 2 {
            let p = self.p;
            for a in 0..p {
                let wa = w * x[a];
                let row = &mut self.s2[a * p..(a + 1) * p];
                for b in a..p {
                    row[b] += wa * x[b];
                }
            }
        }
    }

    /// log Σ exp(η) over the accumulated set.
    pub fn ln_s0(&self) -> f64 {
        self.m + self.s0.ln()
    }

    /// S⁽¹⁾/S⁽⁰⁾.
    pub fn mean_into(&self, out: &mut [f64]) {
        for (o, &s) in out.iter_mut().zip(&self.s1) {
            *o = s / self.s0;
        }
    }

    /// Adds `weight · (S⁽²⁾/S⁽⁰⁾ − x̄x̄ᵀ)` into a full p×p buffer.
    pub fn add_covariance(&self, mean: &[f64], weight: f64, out: &mut [f64]) {
        let p = self.p;
        for a in 0..p {
            for b in a..p {
                let v = weight * (self.s2[a * p + b] / self.s0 - mean[a] * mean[b]);
                out[a * p + b] += v;
                if a != b {
                    out[b * p + a] += v;
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear predictors βᵀX_i for constant paths, indexed by record.
pub(crate) fn linear_predictors(ds: &Dataset, beta: &[f64]) -> Vec<f64> {
    (0..ds.n()).map(|i| dot(ds.features(i), beta)).collect()
}

/// Walks the event groups of a constant-path dataset from the latest time
/// backwards, growing the risk set by suffix, and calls `visit` once per
/// group with the accumulated risk set.
pub(crate) fn scan_constant_groups(
    ds: &Dataset,
    eta: &[f64],
    order: usize,
    mut visit: impl FnMut(usize, &EventGroup, &RiskAccumulator),
) {
    let sort = ds.sort_index();
    let groups = ds.event_groups();
    let mut acc = RiskAccumulator::new(ds.p(), order);
    let mut pos = ds.n();
    for (gi, g) in groups.iter().enumerate().rev() {
        while pos > g.start {
            pos -= 1;
            let j = sort[pos];
            acc.add(ds.features(j), eta[j]);
        }
        visit(gi, g, &acc);
    }
}

/// Risk set of one event group for a time-dependent dataset, with every
/// at-risk covariate evaluated at the group's time. `events_x` receives the
/// event subjects' X(t), row-major, and `events_eta` their predictors.
pub(crate) fn dependent_group(
    ds: &Dataset,
    beta: &[f64],
    g: &EventGroup,
    order: usize,
    events_x: &mut Vec<f64>,
    events_eta: &mut Vec<f64>,
) -> RiskAccumulator {
    let p = ds.p();
    let sort = ds.sort_index();
    let point = ds.path().at(g.time);
    let mut acc = RiskAccumulator::new(p, order);
    let mut x = vec![0.0; p];
    events_x.clear();
    events_eta.clear();
    for (k, &j) in sort[g.start..].iter().enumerate() {
        point.eval_into(ds.features(j), &mut x);
        let eta = dot(&x, beta);
        if k < g.events {
            events_x.extend_from_slice(&x);
            events_eta.push(eta);
        }
        acc.add(&x, eta);
    }
    acc
}
