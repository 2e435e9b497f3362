use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{scatter_rows, LinearOperator, OperatorKind, SparseMatrix};
use crate::error::{Error, Result};

fn default_step() -> f64 {
    0.5
}

/// Circular cone-beam orbit in the z = 0 plane. The source sits at
/// `source_radius·(cos β, sin β, 0)`; the flat detector is centered
/// `detector_distance` away from the source on the far side of the axis,
/// with columns along `(-sin β, cos β, 0)` and rows along z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeBeamGeometry {
    pub source_radius: f64,
    pub detector_distance: f64,
    pub angles: Vec<f64>,
    pub det_rows: usize,
    pub det_cols: usize,
    pub pixel_pitch: f64,
    /// Sample spacing along each ray, in voxels.
    #[serde(default = "default_step")]
    pub step: f64,
}

impl ConeBeamGeometry {
    /// Full 360° orbit with `views` equally spaced source angles.
    pub fn circular(
        source_radius: f64,
        detector_distance: f64,
        views: usize,
        det_rows: usize,
        det_cols: usize,
        pixel_pitch: f64,
    ) -> Self {
        let angles = (0..views)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / views as f64)
            .collect();
        Self {
            source_radius,
            detector_distance,
            angles,
            det_rows,
            det_cols,
            pixel_pitch,
            step: default_step(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.angles.is_empty() || self.det_rows == 0 || self.det_cols == 0 {
            return Err(Error::Geometry("need at least one view and one detector pixel".into()));
        }
        for (name, v) in [
            ("source_radius", self.source_radius),
            ("detector_distance", self.detector_distance),
            ("pixel_pitch", self.pixel_pitch),
            ("step", self.step),
        ] {
            if !positive(v) {
                return Err(Error::Geometry(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.detector_distance <= self.source_radius {
            return Err(Error::Geometry(format!(
                "detector_distance {} must exceed source_radius {}",
                self.detector_distance, self.source_radius
            )));
        }
        if self.angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::Geometry("angles must be finite".into()));
        }
        Ok(())
    }

    fn rays_per_view(&self) -> usize {
        self.det_rows * self.det_cols
    }
}

/// Cone-beam projector over a voxel grid of isotropic pitch `voxel`,
/// centered at the origin. Each ray is sampled at a fixed step and every
/// sample deposits its trilinear interpolation weights times the step
/// length. Matrix-free.
#[derive(Debug, Clone)]
pub struct ConeBeamOperator {
    geometry: ConeBeamGeometry,
    dims: [usize; 3],
    voxel: f64,
}

impl ConeBeamOperator {
    pub fn new(geometry: ConeBeamGeometry, dims: [usize; 3], voxel: f64) -> Result<Self> {
        geometry.validate()?;
        if dims.contains(&0) || !(voxel > 0.0 && voxel.is_finite()) {
            return Err(Error::Geometry(format!("invalid grid {dims:?} x {voxel}")));
        }
        let op = Self { geometry, dims, voxel };
        let half = op.half_extent();
        for &beta in &op.geometry.angles {
            let (sin, cos) = beta.sin_cos();
            let s = [op.geometry.source_radius * cos, op.geometry.source_radius * sin];
            if s[0].abs() < half[0] && s[1].abs() < half[1] {
                return Err(Error::Geometry(format!(
                    "source at angle {beta} lies inside the volume"
                )));
            }
        }
        Ok(op)
    }

    pub fn geometry(&self) -> &ConeBeamGeometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Half-widths of the region where trilinear weights can be nonzero.
    fn half_extent(&self) -> [f64; 3] {
        self.dims.map(|n| (n as f64 + 1.0) * self.voxel / 2.0)
    }

    /// Source position and unit direction of ray `i`, plus the distance to
    /// its detector pixel.
    fn ray(&self, i: usize) -> ([f64; 3], [f64; 3], f64) {
        let g = &self.geometry;
        let per = g.rays_per_view();
        let (view, pix) = (i / per, i % per);
        let (r, c) = (pix / g.det_cols, pix % g.det_cols);
        let (sin, cos) = g.angles[view].sin_cos();
        let src = [g.source_radius * cos, g.source_radius * sin, 0.0];
        let back = g.detector_distance - g.source_radius;
        let du = (c as f64 - (g.det_cols as f64 - 1.0) / 2.0) * g.pixel_pitch;
        let dv = (r as f64 - (g.det_rows as f64 - 1.0) / 2.0) * g.pixel_pitch;
        let det = [-back * cos - du * sin, -back * sin + du * cos, dv];
        let d = [det[0] - src[0], det[1] - src[1], det[2] - src[2]];
        let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        (src, d.map(|v| v / len), len)
    }

    /// Visit `(voxel index, weight)` for each trilinear deposit of ray `i`.
    /// Indices may repeat.
    pub fn trace<F: FnMut(usize, f64)>(&self, i: usize, mut visit: F) {
        let (src, dir, len) = self.ray(i);
        let half = self.half_extent();
        let (mut t_lo, mut t_hi) = (0.0f64, len);
        for k in 0..3 {
            if dir[k].abs() < 1e-300 {
                if src[k].abs() >= half[k] {
                    return;
                }
            } else {
                let t0 = (-half[k] - src[k]) / dir[k];
                let t1 = (half[k] - src[k]) / dir[k];
                t_lo = t_lo.max(t0.min(t1));
                t_hi = t_hi.min(t0.max(t1));
            }
        }
        if t_hi <= t_lo {
            return;
        }
        let h = self.voxel;
        let span = t_hi - t_lo;
        let samples = (span / (self.geometry.step * h)).ceil().max(1.0) as usize;
        let dt = span / samples as f64;
        let [nx, ny, _] = self.dims;
        let center = self.dims.map(|n| (n as f64 - 1.0) / 2.0);
        for k in 0..samples {
            let t = t_lo + (k as f64 + 0.5) * dt;
            let mut base = [0isize; 3];
            let mut frac = [0.0; 3];
            for a in 0..3 {
                let q = (src[a] + t * dir[a]) / h + center[a];
                let f = q.floor();
                base[a] = f as isize;
                frac[a] = q - f;
            }
            for corner in 0..8 {
                let off = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
                let mut w = dt;
                let mut idx = [0usize; 3];
                let mut inside = true;
                for a in 0..3 {
                    let p = base[a] + off[a] as isize;
                    if p < 0 || p as usize >= self.dims[a] {
                        inside = false;
                        break;
                    }
                    idx[a] = p as usize;
                    w *= if off[a] == 1 { frac[a] } else { 1.0 - frac[a] };
                }
                if inside && w != 0.0 {
                    visit((idx[2] * ny + idx[1]) * nx + idx[0], w);
                }
            }
        }
    }

    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        let mut row = Vec::new();
        self.trace(i, |j, w| row.push((j, w)));
        row
    }

    /// Explicit sparse copy of the operator. Memory grows with
    /// rays × samples; meant for moderate grids.
    pub fn assemble(&self) -> Result<SparseMatrix> {
        let rows = (0..self.rows()).into_par_iter().map(|i| self.row(i)).collect();
        Ok(SparseMatrix::from_rows(self.cols(), rows)?.with_label(self.id()))
    }
}

impl LinearOperator for ConeBeamOperator {
    fn rows(&self) -> usize {
        self.geometry.angles.len() * self.geometry.rays_per_view()
    }

    fn cols(&self) -> usize {
        self.dims.iter().product()
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Conebeam3d
    }

    fn id(&self) -> String {
        let g = &self.geometry;
        format!(
            "conebeam3d:{}x{}x{}:views{}:det{}x{}",
            self.dims[0],
            self.dims[1],
            self.dims[2],
            g.angles.len(),
            g.det_rows,
            g.det_cols
        )
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().with_min_len(16).for_each(|(i, o)| {
            let mut s = 0.0;
            self.trace(i, |j, w| s += w * x[j]);
            *o = s;
        });
    }

    fn apply_transpose_into(&self, r: &[f64], out: &mut [f64]) {
        scatter_rows(self.rows(), out, |i, acc| {
            let ri = r[i];
            if ri != 0.0 {
                self.trace(i, |j, w| acc[j] += w * ri);
            }
        });
    }
}
