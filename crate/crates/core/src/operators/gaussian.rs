use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{scatter_rows, LinearOperator, OperatorKind};
use crate::error::{Error, Result};
use crate::rng;

/// Default cap on materialized entries (2²⁷ doubles = 1 GiB).
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 27;

/// Dense operator with i.i.d. N(0, 1) entries. Row `i` is drawn from its
/// own counter-based stream `(seed, i)`.
#[derive(Debug, Clone)]
pub struct GaussianOperator {
    m: usize,
    n: usize,
    seed: u64,
    data: Vec<f64>,
}

impl GaussianOperator {
    pub fn new(m: usize, n: usize, seed: u64) -> Result<Self> {
        Self::with_budget(m, n, seed, DEFAULT_MEMORY_BUDGET)
    }

    pub fn with_budget(m: usize, n: usize, seed: u64, max_entries: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Shape(format!("gaussian operator needs m, n >= 1 (got {m}x{n})")));
        }
        let entries = m
            .checked_mul(n)
            .filter(|&e| e <= max_entries)
            .ok_or_else(|| Error::Capacity(format!("{m}x{n} exceeds budget of {max_entries} entries")))?;
        let mut data = vec![0.0; entries];
        data.par_chunks_mut(n).enumerate().for_each(|(i, row)| fill_row(seed, i, row));
        Ok(Self { m, n, seed, data })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Regenerate row `i` of the operator keyed by `seed`.
pub(crate) fn fill_row(seed: u64, i: usize, row: &mut [f64]) {
    let mut r = rng::stream(seed, i as u64);
    row.iter_mut().for_each(|v| *v = r.sample(StandardNormal));
}

impl LinearOperator for GaussianOperator {
    fn rows(&self) -> usize {
        self.m
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Gaussian
    }

    fn id(&self) -> String {
        format!("gaussian:{}x{}:seed{}", self.m, self.n, self.seed)
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.par_iter_mut().enumerate().with_min_len(64).for_each(|(i, o)| {
            *o = self.data[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
        });
    }

    fn apply_transpose_into(&self, r: &[f64], out: &mut [f64]) {
        let n = self.n;
        scatter_rows(self.m, out, |i, acc| {
            let ri = r[i];
            for (a, v) in acc.iter_mut().zip(&self.data[i * n..(i + 1) * n]) {
                *a += v * ri;
            }
        });
    }
}
