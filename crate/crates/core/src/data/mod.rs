//! Survival records, datasets sorted by observed time, and CSV ingestion.

mod csv_io;
mod path;

pub use csv_io::{load_csv, read_csv, write_csv, CsvLoad, CsvSchema};
pub use path::{BasisFn, BasisLayout, CovariatePathSpec, PathPoint};

use std::cmp::Ordering;

use crate::error::{CoxError, Result};

/// One subject: observed time Y = min(T, C), event indicator, static features.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub y: f64,
    pub delta: bool,
    pub features: Vec<f64>,
    pub path: CovariatePathSpec,
}

impl SurvivalRecord {
    /// X(t) for this subject.
    pub fn evaluate_covariate(&self, t: f64) -> Vec<f64> {
        self.path.evaluate(&self.features, t)
    }
}

/// A distinct observed time at which at least one event occurs.
///
/// `start` is the first position in sort order with `y == time`; the risk set
/// is every sort position from `start` on. Events come first among ties, so
/// the event positions are `start..start + events`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventGroup {
    pub time: f64,
    pub start: usize,
    pub events: usize,
}

/// Column-oriented, immutable collection of survival records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    time: Vec<f64>,
    status: Vec<bool>,
    features: Vec<f64>,
    feature_dim: usize,
    feature_names: Vec<String>,
    path: CovariatePathSpec,
    p: usize,
    sort_index: Vec<usize>,
    sorted_time: Vec<f64>,
    groups: Vec<EventGroup>,
}

impl Dataset {
    /// Builds a dataset from columns; `features` is row-major `n × feature_dim`.
    pub fn new(
        time: Vec<f64>,
        status: Vec<bool>,
        features: Vec<f64>,
        feature_dim: usize,
        path: CovariatePathSpec,
    ) -> Result<Self> {
        let n = time.len();
        if n == 0 {
            return Err(CoxError::EmptyDataset);
        }
        if status.len() != n {
            return Err(CoxError::DimensionMismatch { expected: n, found: status.len() });
        }
        if features.len() != n * feature_dim {
            return Err(CoxError::DimensionMismatch {
                expected: n * feature_dim,
                found: features.len(),
            });
        }
        for (row, &y) in time.iter().enumerate() {
            if !y.is_finite() {
                return Err(CoxError::NonFiniteValue("observed time"));
            }
            if y < 0.0 {
                return Err(CoxError::NegativeTime { row, value: y });
            }
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(CoxError::NonFiniteValue("feature"));
        }
        let p = path.covariate_dim(feature_dim)?;
        if p == 0 {
            return Err(CoxError::InvalidArgument("no covariates".into()));
        }

        let mut sort_index: Vec<usize> = (0..n).collect();
        // increasing y; events before censorings; then input order
        sort_index.sort_by(|&a, &b| {
            time[a]
                .partial_cmp(&time[b])
                .unwrap_or(Ordering::Equal)
                .then(status[b].cmp(&status[a]))
                .then(a.cmp(&b))
        });
        let sorted_time: Vec<f64> = sort_index.iter().map(|&i| time[i]).collect();

        let mut groups = Vec::new();
        let mut pos = 0;
        while pos < n {
            let t = sorted_time[pos];
            let mut end = pos;
            let mut events = 0;
            while end < n && sorted_time[end] == t {
                if status[sort_index[end]] {
                    events += 1;
                }
                end += 1;
            }
            if events > 0 {
                groups.push(EventGroup { time: t, start: pos, events });
            }
            pos = end;
        }

        let feature_names = (1..=feature_dim).map(|j| format!("x{j}")).collect();
        Ok(Self {
            time,
            status,
            features,
            feature_dim,
            feature_names,
            path,
            p,
            sort_index,
            sorted_time,
            groups,
        })
    }

    /// Builds a dataset from records that share one covariate path.
    pub fn from_records(records: &[SurvivalRecord]) -> Result<Self> {
        let first = records.first().ok_or(CoxError::EmptyDataset)?;
        let d = first.features.len();
        let mut time = Vec::with_capacity(records.len());
        let mut status = Vec::with_capacity(records.len());
        let mut features = Vec::with_capacity(records.len() * d);
        for r in records {
            if r.features.len() != d {
                return Err(CoxError::DimensionMismatch { expected: d, found: r.features.len() });
            }
            if r.path != first.path {
                return Err(CoxError::InvalidPath("records use different covariate paths".into()));
            }
            time.push(r.y);
            status.push(r.delta);
            features.extend_from_slice(&r.features);
        }
        Self::new(time, status, features, d, first.path.clone())
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.feature_dim {
            return Err(CoxError::DimensionMismatch {
                expected: self.feature_dim,
                found: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.time.len()
    }

    /// Covariate dimension after path expansion.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn path(&self) -> &CovariatePathSpec {
        &self.path
    }

    pub fn is_time_dependent(&self) -> bool {
        !self.path.is_constant()
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.time[i]
    }

    #[inline]
    pub fn status(&self, i: usize) -> bool {
        self.status[i]
    }

    #[inline]
    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn times(&self) -> &[f64] {
        &self.time
    }

    pub fn statuses(&self) -> &[bool] {
        &self.status
    }

    pub fn sort_index(&self) -> &[usize] {
        &self.sort_index
    }

    /// Observed times along the sort order.
    pub fn sorted_time(&self) -> &[f64] {
        &self.sorted_time
    }

    /// Distinct event times with their risk-set start positions.
    pub fn event_groups(&self) -> &[EventGroup] {
        &self.groups
    }

    pub fn n_events(&self) -> usize {
        self.groups.iter().map(|g| g.events).sum()
    }

    pub fn record(&self, i: usize) -> SurvivalRecord {
        SurvivalRecord {
            y: self.time[i],
            delta: self.status[i],
            features: self.features(i).to_vec(),
            path: self.path.clone(),
        }
    }

    /// X_i(t) written into `out` (length p).
    #[inline]
    pub fn covariate_into(&self, i: usize, t: f64, out: &mut [f64]) {
        self.path.at(t).eval_into(self.features(i), out);
    }

    pub fn covariate(&self, i: usize, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        self.covariate_into(i, t, &mut out);
        out
    }

    /// First sort position with y ≥ t.
    pub fn risk_start(&self, t: f64) -> usize {
        self.sorted_time.partition_point(|&y| y < t)
    }

    /// Indices (input order numbering) of subjects with y ≥ t.
    pub fn at_risk_indices(&self, t: f64) -> Vec<usize> {
        self.sort_index[self.risk_start(t)..].to_vec()
    }

    /// New dataset holding the given records, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let n = self.n();
        let d = self.feature_dim;
        let mut time = Vec::with_capacity(indices.len());
        let mut status = Vec::with_capacity(indices.len());
        let mut features = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= n {
                return Err(CoxError::IndexOutOfRange { index: i, n });
            }
            time.push(self.time[i]);
            status.push(self.status[i]);
            features.extend_from_slice(self.features(i));
        }
        Self::new(time, status, features, d, self.path.clone())?
            .with_feature_names(self.feature_names.clone())
    }
}
