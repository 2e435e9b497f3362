//! Shepp-Logan volumes with a graded-density test ellipsoid, and PSNR.
//!
//! Coordinates are normalized to `[-1, 1]` per axis; voxel `i` of an axis
//! with `N` voxels has its center at `-1 + (2i + 1)/N`. Each voxel takes
//! the value at its center (no anti-aliasing). 2D phantoms are the `z = 0`
//! plane of the 3D table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};
use crate::model::{Grid, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSpec {
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    /// ZYZ Euler angles `(φ, θ, ψ)` in radians.
    pub rotation: [f64; 3],
    /// Additive density.
    pub density: f64,
}

impl EllipsoidSpec {
    /// Rotation matrix `Rz(φ)·Ry(θ)·Rz(ψ)` taking body axes to world axes.
    fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let [phi, theta, psi] = self.rotation;
        let (sf, cf) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = psi.sin_cos();
        [
            [cf * ct * cp - sf * sp, -cf * ct * sp - sf * cp, cf * st],
            [sf * ct * cp + cf * sp, -sf * ct * sp + cf * cp, sf * st],
            [-st * cp, st * sp, ct],
        ]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let r = self.rotation_matrix();
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        // body coordinates are Rᵀ d
        let s: f64 = (0..3)
            .map(|k| (r[0][k] * d[0] + r[1][k] * d[1] + r[2][k] * d[2]) / self.semi_axes[k])
            .map(|q| q * q)
            .sum();
        s <= 1.0
    }
}

const fn deg(v: f64) -> f64 {
    v * std::f64::consts::PI / 180.0
}

/// Modified Shepp-Logan table in 3D (Toft's higher-contrast densities):
/// `(density, semi-axes, center, Euler angles)`.
pub const SHEPP_LOGAN_3D: [EllipsoidSpec; 10] = {
    const fn e(a: f64, ax: [f64; 3], c: [f64; 3], rot: [f64; 3]) -> EllipsoidSpec {
        EllipsoidSpec {
            center: c,
            semi_axes: ax,
            rotation: [deg(rot[0]), deg(rot[1]), deg(rot[2])],
            density: a,
        }
    }
    [
        e(1.0, [0.69, 0.92, 0.81], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
        e(-0.8, [0.6624, 0.874, 0.78], [0.0, -0.0184, 0.0], [0.0, 0.0, 0.0]),
        e(-0.2, [0.11, 0.31, 0.22], [0.22, 0.0, 0.0], [-18.0, 0.0, 10.0]),
        e(-0.2, [0.16, 0.41, 0.28], [-0.22, 0.0, 0.0], [18.0, 0.0, 10.0]),
        e(0.1, [0.21, 0.25, 0.41], [0.0, 0.35, -0.15], [0.0, 0.0, 0.0]),
        e(0.1, [0.046, 0.046, 0.05], [0.0, 0.1, 0.25], [0.0, 0.0, 0.0]),
        e(0.1, [0.046, 0.046, 0.05], [0.0, -0.1, 0.25], [0.0, 0.0, 0.0]),
        e(0.1, [0.046, 0.023, 0.05], [-0.08, -0.605, 0.0], [0.0, 0.0, 0.0]),
        e(0.1, [0.023, 0.023, 0.02], [0.0, -0.606, 0.0], [0.0, 0.0, 0.0]),
        e(0.1, [0.023, 0.046, 0.02], [0.06, -0.605, 0.0], [0.0, 0.0, 0.0]),
    ]
};

/// Index of the ellipsoid used for the density sweep.
pub const TEST_ELLIPSOID: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityPreset {
    Soft,
    Bone,
    Metal,
}

impl DensityPreset {
    pub const ALL: [DensityPreset; 3] = [DensityPreset::Soft, DensityPreset::Bone, DensityPreset::Metal];

    /// Added density of the test ellipsoid after scaling.
    pub fn density(self) -> f64 {
        match self {
            DensityPreset::Soft => 0.05,
            DensityPreset::Bone => 0.25,
            DensityPreset::Metal => 1.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DensityPreset::Soft => "soft",
            DensityPreset::Bone => "bone",
            DensityPreset::Metal => "metal",
        }
    }
}

fn default_scale() -> f64 {
    0.25
}

fn default_enlargement() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomConfig {
    pub dims: Vec<usize>,
    #[serde(default = "default_scale")]
    pub density_scale: f64,
    /// Added density of the test ellipsoid after scaling; `None` keeps the
    /// table value.
    #[serde(default)]
    pub test_ellipsoid_density: Option<f64>,
    #[serde(default = "default_enlargement")]
    pub test_ellipsoid_enlargement: f64,
}

impl PhantomConfig {
    pub fn new(dims: Vec<usize>) -> Self {
        Self {
            dims,
            density_scale: default_scale(),
            test_ellipsoid_density: None,
            test_ellipsoid_enlargement: default_enlargement(),
        }
    }

    /// Enlarged test ellipsoid at one of the sweep densities.
    pub fn preset(dims: Vec<usize>, preset: DensityPreset) -> Self {
        Self {
            test_ellipsoid_density: Some(preset.density()),
            test_ellipsoid_enlargement: 1.3,
            ..Self::new(dims)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dims.len()) || self.dims.iter().any(|&d| d < 16) {
            return Err(Error::Shape(format!(
                "phantom dims must be 2 or 3 axes of at least 16 voxels, got {:?}",
                self.dims
            )));
        }
        if !(self.density_scale > 0.0 && self.density_scale.is_finite()) {
            return Err(Error::Domain(format!("density_scale must be > 0, got {}", self.density_scale)));
        }
        if !(self.test_ellipsoid_enlargement > 0.0 && self.test_ellipsoid_enlargement.is_finite()) {
            return Err(Error::Domain(format!(
                "test_ellipsoid_enlargement must be > 0, got {}",
                self.test_ellipsoid_enlargement
            )));
        }
        if let Some(d) = self.test_ellipsoid_density {
            if !d.is_finite() {
                return Err(Error::Domain(format!("test_ellipsoid_density must be finite, got {d}")));
            }
        }
        Ok(())
    }

    /// The table after applying the test-ellipsoid modification and the
    /// density scale.
    pub fn ellipsoids(&self) -> Vec<EllipsoidSpec> {
        let mut table = SHEPP_LOGAN_3D.to_vec();
        for e in table.iter_mut() {
            e.density *= self.density_scale;
        }
        let t = &mut table[TEST_ELLIPSOID];
        t.semi_axes = t.semi_axes.map(|a| a * self.test_ellipsoid_enlargement);
        if let Some(d) = self.test_ellipsoid_density {
            t.density = d;
        }
        table
    }
}

/// Rasterize the phantom described by `config`.
pub fn shepp_logan(config: &PhantomConfig) -> Result<Signal> {
    config.validate()?;
    let table = config.ellipsoids();
    let dims = &config.dims;
    let (nx, ny) = (dims[0], dims[1]);
    let nz = dims.get(2).copied().unwrap_or(1);
    let coord = |i: usize, n: usize| -1.0 + (2 * i + 1) as f64 / n as f64;
    let values: Vec<f64> = (0..nz)
        .into_par_iter()
        .flat_map_iter(|iz| {
            let z = if dims.len() == 3 { coord(iz, nz) } else { 0.0 };
            let table = &table;
            (0..nx * ny).map(move |k| {
                let p = [coord(k % nx, nx), coord(k / nx, ny), z];
                let v: f64 = table.iter().filter(|e| e.contains(p)).map(|e| e.density).sum();
                v.max(0.0)
            })
        })
        .collect();
    let grid = Grid::new(dims.clone(), vec![2.0 / nx as f64; dims.len()])?;
    Signal::with_grid(values, grid)?.into_nonneg()
}

/// `-10 log₁₀(MSE)`; `+∞` when the volumes are identical.
pub fn psnr(recon: &[f64], truth: &[f64]) -> Result<f64> {
    shape_check("psnr volumes", truth.len(), recon.len())?;
    if truth.is_empty() {
        return Err(Error::Shape("psnr of empty volumes".into()));
    }
    let mse = recon.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / truth.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}
