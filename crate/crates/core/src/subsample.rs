//! Uniform Poisson subsampling and the uniform-subsample Cox fit.
//!
//! Inclusion of record `i` is decided by the `i`-th 64-bit output of a
//! ChaCha8 stream keyed on the seed, located by seeking rather than by
//! drawing sequentially. The decision for an index therefore never depends
//! on `n`, on chunking, or on thread count.

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cox::{newton_raphson_fit, FitResult, NewtonOptions};
use crate::data::Dataset;
use crate::error::{CoxError, Result};

/// Generator stream for the main subsample.
pub const MAIN_STREAM: u64 = 0;
/// Generator stream for the pilot subsample.
pub const PILOT_STREAM: u64 = 1;

const DRAW_CHUNK: usize = 8192;

/// Default pilot size ⌈r^{2/3} ln r⌉ (at least 1).
pub fn default_pilot_size(r: usize) -> usize {
    let r = r as f64;
    ((r.powf(2.0 / 3.0) * r.ln()).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsamplePlan {
    pub expected_size: usize,
    pub pilot_size: usize,
    pub seed: u64,
}

impl SubsamplePlan {
    pub fn new(expected_size: usize, seed: u64) -> Self {
        Self { expected_size, pilot_size: default_pilot_size(expected_size), seed }
    }

    pub fn with_pilot_size(mut self, pilot_size: usize) -> Self {
        self.pilot_size = pilot_size;
        self
    }

    /// Inclusion probability r/n, capped at 1.
    pub fn rate(&self, n: usize) -> f64 {
        (self.expected_size as f64 / n as f64).min(1.0)
    }

    pub fn pilot_rate(&self, n: usize) -> f64 {
        (self.pilot_size as f64 / n as f64).min(1.0)
    }
}

/// Sorted indices of the included records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsampleIndex {
    pub indices: Vec<usize>,
    pub parent_n: usize,
}

impl SubsampleIndex {
    pub fn realized_size(&self) -> usize {
        self.indices.len()
    }

    pub fn all(n: usize) -> Self {
        Self { indices: (0..n).collect(), parent_n: n }
    }
}

/// Uniform draw in [0, 1) for every index of `range`, from `stream` of `seed`.
fn uniforms(seed: u64, stream: u64, start: usize, len: usize) -> impl Iterator<Item = f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    // one u64 output spans two 32-bit words
    rng.set_word_pos(2 * start as u128);
    (0..len).map(move |_| (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
}

/// Independent Bernoulli(rate) inclusion of each index in `0..n`.
pub fn bernoulli_subsample(n: usize, rate: f64, seed: u64, stream: u64) -> Result<SubsampleIndex> {
    if n == 0 {
        return Err(CoxError::EmptyDataset);
    }
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(CoxError::InvalidArgument(format!("sampling rate {rate} outside (0, 1]")));
    }
    let indices: Vec<usize> = if rate >= 1.0 {
        (0..n).collect()
    } else {
        let chunks: Vec<Vec<usize>> = (0..n.div_ceil(DRAW_CHUNK))
            .into_par_iter()
            .map(|c| {
                let start = c * DRAW_CHUNK;
                let len = DRAW_CHUNK.min(n - start);
                uniforms(seed, stream, start, len)
                    .enumerate()
                    .filter(|&(_, u)| u < rate)
                    .map(|(k, _)| start + k)
                    .collect()
            })
            .collect();
        chunks.concat()
    };
    if indices.is_empty() {
        return Err(CoxError::EmptySubsample);
    }
    Ok(SubsampleIndex { indices, parent_n: n })
}

/// Main subsample with inclusion probability `plan.rate(n)`.
pub fn poisson_subsample(n: usize, plan: &SubsamplePlan) -> Result<SubsampleIndex> {
    bernoulli_subsample(n, plan.rate(n), plan.seed, MAIN_STREAM)
}

/// Pilot subsample, drawn independently of the main one.
pub fn pilot_subsample(n: usize, plan: &SubsamplePlan) -> Result<SubsampleIndex> {
    bernoulli_subsample(n, plan.pilot_rate(n), plan.seed, PILOT_STREAM)
}

pub fn subset(ds: &Dataset, idx: &SubsampleIndex) -> Result<Dataset> {
    if idx.parent_n != ds.n() {
        return Err(CoxError::DimensionMismatch { expected: ds.n(), found: idx.parent_n });
    }
    ds.select(&idx.indices)
}

/// Newton fit on a subsample, requiring at least p events.
pub fn fit_subsample(sub: &Dataset, opts: &NewtonOptions) -> Result<FitResult> {
    let events = sub.n_events();
    if events < sub.p() {
        return Err(CoxError::TooFewEvents { events, required: sub.p() });
    }
    newton_raphson_fit(sub, &DVector::zeros(sub.p()), opts)
}

/// β̃_uni from a uniform Poisson subsample of `ds`. The fit's variance is
/// (r·Σ̃)⁻¹ with r the realized subsample size.
pub fn fit_uniform(
    ds: &Dataset,
    plan: &SubsamplePlan,
    opts: &NewtonOptions,
) -> Result<(FitResult, SubsampleIndex)> {
    let idx = poisson_subsample(ds.n(), plan)?;
    let fit = fit_subsample(&subset(ds, &idx)?, opts)?;
    Ok((fit, idx))
}
