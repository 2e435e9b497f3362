//! Anisotropic total variation `Σ_axes Σ √(d² + ε²)` over forward
//! differences `d` between grid neighbours.

use crate::error::{shape_check, Error, Result};
use crate::model::{Grid, Signal};

pub const TV_EPSILON: f64 = 1e-8;

fn grid_of(signal: &Signal) -> Result<&Grid> {
    signal
        .grid()
        .ok_or_else(|| Error::Shape("total variation needs a signal with grid geometry".into()))
}

pub fn tv_value(signal: &Signal) -> Result<f64> {
    tv_value_on(grid_of(signal)?, signal.values())
}

pub fn tv_subgradient(signal: &Signal) -> Result<Vec<f64>> {
    let mut g = vec![0.0; signal.len()];
    tv_subgradient_on(grid_of(signal)?, signal.values(), &mut g)?;
    Ok(g)
}

fn for_each_pair<F: FnMut(usize, usize)>(grid: &Grid, mut f: F) {
    let strides = grid.strides();
    let n = grid.len();
    for (axis, &dim) in grid.dims.iter().enumerate() {
        let stride = strides[axis];
        for i in 0..n {
            if (i / stride) % dim + 1 < dim {
                f(i, i + stride);
            }
        }
    }
}

pub fn tv_value_on(grid: &Grid, z: &[f64]) -> Result<f64> {
    shape_check("tv input", grid.len(), z.len())?;
    let mut sum = 0.0;
    for_each_pair(grid, |i, j| {
        let d = z[j] - z[i];
        sum += (d * d + TV_EPSILON * TV_EPSILON).sqrt();
    });
    Ok(sum)
}

/// Gradient of the smoothed TV, written into `out`.
pub fn tv_subgradient_on(grid: &Grid, z: &[f64], out: &mut [f64]) -> Result<()> {
    shape_check("tv input", grid.len(), z.len())?;
    shape_check("tv output", grid.len(), out.len())?;
    out.iter_mut().for_each(|v| *v = 0.0);
    for_each_pair(grid, |i, j| {
        let d = z[j] - z[i];
        let s = d / (d * d + TV_EPSILON * TV_EPSILON).sqrt();
        out[j] += s;
        out[i] -= s;
    });
    Ok(())
}
