use rayon::prelude::*;

use super::{scatter_rows, LinearOperator, OperatorKind};
use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    label: String,
}

impl SparseMatrix {
    /// Build from per-row `(column, value)` lists. Duplicate columns within
    /// a row are summed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if cols > u32::MAX as usize {
            return Err(Error::Capacity(format!("{cols} columns exceed u32 indexing")));
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable_by_key(|e| e.0);
            let start = indices.len();
            for (j, v) in row {
                if j >= cols {
                    return Err(Error::Shape(format!("row {i}: column {j} out of range {cols}")));
                }
                if indices.len() > start && *indices.last().unwrap() as usize == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j as u32);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self { cols, indptr, indices, values, label: "sparse".into() })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().map(|&j| j as usize).zip(self.values[r].iter().copied())
    }
}

impl LinearOperator for SparseMatrix {
    fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Sparse
    }

    fn id(&self) -> String {
        format!("{}:{}x{}:nnz{}", self.label, self.rows(), self.cols, self.nnz())
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, o)| {
            let r = self.indptr[i]..self.indptr[i + 1];
            let mut s = 0.0;
            for (&j, &v) in self.indices[r.clone()].iter().zip(&self.values[r]) {
                s += v * x[j as usize];
            }
            *o = s;
        });
    }

    fn apply_transpose_into(&self, r: &[f64], out: &mut [f64]) {
        scatter_rows(self.rows(), out, |i, acc| {
            let ri = r[i];
            if ri == 0.0 {
                return;
            }
            let span = self.indptr[i]..self.indptr[i + 1];
            for (&j, &v) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                acc[j as usize] += v * ri;
            }
        });
    }
}
