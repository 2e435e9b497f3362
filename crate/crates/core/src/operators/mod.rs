//! Linear measurement operators `A: ℝⁿ → ℝᵐ` and their transposes.
//!
//! All operators are immutable after construction. Forward application is
//! row-parallel (each output entry is an independent, sequentially summed
//! dot product); transposed application scatters rows into a fixed number
//! of partial buffers that are reduced in index order, so both directions
//! are bit-reproducible regardless of the thread pool size.

mod cone;
mod gaussian;
mod radon;
mod sparse;

pub use cone::{ConeBeamGeometry, ConeBeamOperator};
pub use gaussian::{GaussianOperator, DEFAULT_MEMORY_BUDGET};
pub use radon::{ParallelBeamGeometry, Radon2dOperator};
pub use sparse::SparseMatrix;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Gaussian,
    Radon2d,
    Conebeam3d,
    Sparse,
}

pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn kind(&self) -> OperatorKind;

    /// Short handle identifying the operator instance.
    fn id(&self) -> String;

    /// `out = A x`. Lengths are the caller's responsibility.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// `out = Aᵀ r`. Lengths are the caller's responsibility.
    fn apply_transpose_into(&self, r: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        shape_check("apply input", self.cols(), x.len())?;
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    fn apply_transpose(&self, r: &[f64]) -> Result<Vec<f64>> {
        shape_check("apply_transpose input", self.rows(), r.len())?;
        let mut out = vec![0.0; self.cols()];
        self.apply_transpose_into(r, &mut out);
        Ok(out)
    }
}

/// Number of partial buffers used by transposed products. Fixed, so the
/// reduction order never depends on the thread count.
const SCATTER_BLOCKS: usize = 8;

/// Accumulate `Σ_rows scatter(row)` into `out` with a fixed block
/// partition of the row range.
pub(crate) fn scatter_rows<F>(rows: usize, out: &mut [f64], scatter: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    out.iter_mut().for_each(|v| *v = 0.0);
    if rows == 0 {
        return;
    }
    let blocks = SCATTER_BLOCKS.min(rows);
    let per = rows.div_ceil(blocks);
    let cols = out.len();
    let partials: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; cols];
            for i in (b * per)..((b + 1) * per).min(rows) {
                scatter(i, &mut acc);
            }
            acc
        })
        .collect();
    for p in &partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
}

/// Dense matrix of an operator by probing basis vectors. Test and
/// diagnostic use only: costs `n` applications.
pub fn materialize(op: &dyn LinearOperator) -> Vec<Vec<f64>> {
    let (m, n) = (op.rows(), op.cols());
    let mut dense = vec![vec![0.0; n]; m];
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        e[j] = 0.0;
        for (row, v) in dense.iter_mut().zip(&col) {
            row[j] = *v;
        }
    }
    dense
}

/// Largest eigenvalue of `AᵀWA` (W = diag(weights), or identity) by power
/// iteration from a deterministic start vector.
pub fn normal_operator_norm(op: &dyn LinearOperator, weights: Option<&[f64]>, iterations: usize) -> f64 {
    let n = op.cols();
    let mut v: Vec<f64> = (0..n).map(|j| 1.0 + 0.5 * ((j * 7919) % 13) as f64 / 13.0).collect();
    let mut p = vec![0.0; op.rows()];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let norm = crate::model::norm2(&v);
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        op.apply_into(&v, &mut p);
        if let Some(wt) = weights {
            p.iter_mut().zip(wt).for_each(|(a, b)| *a *= b);
        }
        op.apply_transpose_into(&p, &mut w);
        lambda = crate::model::dot(&v, &w);
        std::mem::swap(&mut v, &mut w);
    }
    lambda
}
