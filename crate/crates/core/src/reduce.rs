//! Deterministic parallel reductions.
//!
//! Work is split into fixed-size chunks whose layout depends only on the input
//! length, never on the number of worker threads. Chunk results are combined in
//! chunk order by a pairwise tree, so a pass run on one thread and on many
//! threads produces the same bits.

use std::ops::Range;

use rayon::prelude::*;

/// Records per chunk for whole-data passes.
pub const CHUNK: usize = 4096;

/// Maps each chunk of `0..len` (in parallel) and folds the partial results
/// with [`tree_reduce`]. Returns `None` when `len == 0`.
pub fn chunked_reduce<A, M, C>(len: usize, chunk: usize, map: M, combine: C) -> Option<A>
where
    A: Send,
    M: Fn(Range<usize>) -> A + Sync + Send,
    C: Fn(A, A) -> A,
{
    assert!(chunk > 0);
    let n_chunks = len.div_ceil(chunk);
    let parts: Vec<A> = (0..n_chunks)
        .into_par_iter()
        .map(|c| map(c * chunk..((c + 1) * chunk).min(len)))
        .collect();
    tree_reduce(parts, combine)
}

/// Pairwise reduction in a fixed order: `((a0+a1)+(a2+a3))+...`.
pub fn tree_reduce<A>(mut parts: Vec<A>, combine: impl Fn(A, A) -> A) -> Option<A> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop()
}

/// Elementwise `a += b`, returning `a`.
pub fn add_vecs(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a sequence, in iteration order.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}
