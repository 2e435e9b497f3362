//! Nonlinear and log-linearized reconstruction pipelines.
//!
//! Both methods share the operator, the iteration budget, λ and the
//! nonnegativity clamp; only the data term differs. Each uses a constant
//! step `1/L` from a power-iteration estimate of its own data-term
//! curvature at the measurements.

use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};
use crate::model::{measure, ForwardModel, Grid, NoiseSpec, Y_MAX_F32};
use crate::operators::{normal_operator_norm, ConeBeamGeometry, ConeBeamOperator, LinearOperator};
use crate::optimize::{ConstraintSet, Descent, StepSchedule, Trajectory};
use crate::phantom::{psnr, shepp_logan, DensityPreset, PhantomConfig};

/// TV weight for volumetric runs. The loss is normalized by `1/(2m)` and
/// the constant steps are in the thousands, so anything much larger lets
/// the TV subgradient dominate each update.
pub const VOLUME_LAMBDA: f64 = 1e-9;

/// `ŷᵢ = -ln(max(1 - yᵢ, eps))`, with the number of clamped entries.
pub fn log_preprocess(y: &[f64], eps: f64) -> Result<(Vec<f64>, usize)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    let mut clamped = 0;
    let out = y
        .iter()
        .map(|&v| {
            let t = 1.0 - v;
            if t < eps {
                clamped += 1;
                -eps.ln()
            } else {
                -t.ln()
            }
        })
        .collect();
    Ok((out, clamped))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nonlinear,
    Linearized,
}

fn default_eps() -> f64 {
    1e-12
}

fn default_power_iterations() -> usize {
    30
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    pub method: Method,
    pub iterations: usize,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_true")]
    pub nonneg: bool,
    /// Log clamp for the linearized method.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Fixed step; estimated from the curvature when absent.
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default = "default_power_iterations")]
    pub power_iterations: usize,
    #[serde(default)]
    pub tol: f64,
}

impl ReconConfig {
    pub fn new(method: Method, iterations: usize, lambda: f64) -> Self {
        Self {
            method,
            iterations,
            lambda,
            nonneg: true,
            eps: default_eps(),
            step: None,
            power_iterations: default_power_iterations(),
            tol: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Domain(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Domain(format!("step must be > 0, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconResult {
    pub method: Method,
    pub trajectory: Trajectory,
    pub step: f64,
    /// Entries clamped by the log preprocessing (0 for the nonlinear method).
    pub clamped: usize,
    pub psnr: Option<f64>,
}

/// Reconstruct from raw measurements `y ∈ [0, 1)`. `grid` supplies the TV
/// neighbourhood; `truth`, when given, fills the PSNR and error columns.
pub fn reconstruct(
    op: &dyn LinearOperator,
    y: &[f64],
    grid: &Grid,
    truth: Option<&[f64]>,
    cfg: &ReconConfig,
) -> Result<ReconResult> {
    cfg.validate()?;
    shape_check("measurements vs operator rows", op.rows(), y.len())?;
    shape_check("grid vs operator columns", op.cols(), grid.len())?;
    let m = op.rows() as f64;
    let (model, data, clamped, weights) = match cfg.method {
        Method::Nonlinear => {
            let w: Vec<f64> = y.iter().map(|v| (1.0 - v) * (1.0 - v)).collect();
            (ForwardModel::Nonlinear, y.to_vec(), 0, Some(w))
        }
        Method::Linearized => {
            let (yhat, clamped) = log_preprocess(y, cfg.eps)?;
            if clamped > 0 {
                log::warn!("log preprocessing clamped {clamped} of {} measurements", y.len());
            }
            (ForwardModel::Linear, yhat, clamped, None)
        }
    };
    let step = match cfg.step {
        Some(s) => s,
        None => {
            let lipschitz = normal_operator_norm(op, weights.as_deref(), cfg.power_iterations) / m;
            if !(lipschitz > 0.0) {
                return Err(Error::Domain("operator has no curvature on the data".into()));
            }
            1.0 / lipschitz
        }
    };
    let constraint = if cfg.nonneg { ConstraintSet::Nonneg } else { ConstraintSet::Unconstrained };
    let descent = Descent::new(StepSchedule::constant(step)?, cfg.iterations, cfg.tol)
        .model(model)
        .constraint(constraint)
        .tv(cfg.lambda, grid.clone())
        .wall_time(false);
    let trajectory = descent.run(op, &data, truth)?;
    let psnr = truth.map(|t| psnr(&trajectory.z, t)).transpose()?;
    Ok(ReconResult { method: cfg.method, trajectory, step, clamped, psnr })
}

/// Circular orbit around a centered `size³` grid of pitch `voxel`: source
/// at three grid widths, magnification 2, square detector wide enough to
/// cover the grid diagonal.
pub fn circular_scan(size: usize, voxel: f64, views: usize, detector: usize) -> ConeBeamGeometry {
    let width = size as f64 * voxel;
    let pitch = 2.0 * std::f64::consts::SQRT_2 * width / detector as f64;
    ConeBeamGeometry::circular(3.0 * width, 6.0 * width, views, detector, detector, pitch)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetalStudyConfig {
    pub size: usize,
    pub voxel: f64,
    pub views: usize,
    pub detector: usize,
    pub iterations: usize,
    pub lambda: f64,
    pub eps: f64,
    pub presets: Vec<DensityPreset>,
}

impl Default for MetalStudyConfig {
    fn default() -> Self {
        Self {
            size: 64,
            voxel: 0.2,
            views: 60,
            detector: 64,
            iterations: 500,
            lambda: VOLUME_LAMBDA,
            eps: 1e-12,
            presets: DensityPreset::ALL.to_vec(),
        }
    }
}

impl MetalStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 16 || self.views == 0 || self.detector == 0 || self.iterations == 0 {
            return Err(Error::Domain(
                "metal study needs size >= 16 and positive views, detector and iterations".into(),
            ));
        }
        if !(self.voxel > 0.0 && self.voxel.is_finite()) {
            return Err(Error::Domain(format!("voxel must be > 0, got {}", self.voxel)));
        }
        if self.presets.is_empty() {
            return Err(Error::Domain("metal study needs at least one preset".into()));
        }
        ReconConfig { eps: self.eps, ..ReconConfig::new(Method::Nonlinear, self.iterations, self.lambda) }
            .validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetOutcome {
    pub preset: DensityPreset,
    pub y_max: f64,
    /// Measurements stored at the f32 ceiling.
    pub saturated: usize,
    pub clamped: usize,
    pub psnr_nonlinear: f64,
    pub psnr_linearized: f64,
}

/// Both reconstructions of each preset phantom from f32-stored cone-beam
/// measurements, on one shared assembled operator.
pub fn metal_study(cfg: &MetalStudyConfig) -> Result<Vec<PresetOutcome>> {
    cfg.validate()?;
    let geometry = circular_scan(cfg.size, cfg.voxel, cfg.views, cfg.detector);
    let op = ConeBeamOperator::new(geometry, [cfg.size; 3], cfg.voxel)?.assemble()?;
    let mut outcomes = Vec::with_capacity(cfg.presets.len());
    for &preset in &cfg.presets {
        let truth = shepp_logan(&PhantomConfig::preset(vec![cfg.size; 3], preset))?;
        let grid = truth.grid().expect("phantoms carry a grid").clone();
        let y = measure(&op, truth.values(), Some(&NoiseSpec::storage_f32()), 0)?.y;
        let run = |method| {
            let mut rc = ReconConfig::new(method, cfg.iterations, cfg.lambda);
            rc.eps = cfg.eps;
            reconstruct(&op, &y, &grid, Some(truth.values()), &rc)
        };
        let nl = run(Method::Nonlinear)?;
        let lin = run(Method::Linearized)?;
        let outcome = PresetOutcome {
            preset,
            y_max: y.iter().cloned().fold(0.0, f64::max),
            saturated: y.iter().filter(|&&v| v >= Y_MAX_F32).count(),
            clamped: lin.clamped,
            psnr_nonlinear: nl.psnr.unwrap_or(f64::NAN),
            psnr_linearized: lin.psnr.unwrap_or(f64::NAN),
        };
        log::info!("{outcome:?}");
        outcomes.push(outcome);
    }
    Ok(outcomes)
}
