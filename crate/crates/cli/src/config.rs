use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nlct::io::read_volume;
use nlct::phantom::{shepp_logan, DensityPreset, PhantomConfig};
use nlct::recon::{circular_scan, MetalStudyConfig, Method, ReconConfig, VOLUME_LAMBDA};
use nlct::{
    ConeBeamGeometry, ConeBeamOperator, Error, GaussianOperator, Grid, LinearOperator, NoiseSpec,
    ParallelBeamGeometry, Radon2dOperator, Result, Signal,
};

use crate::CliError;

/// One experiment. Every block has defaults, so `{}` is a valid config
/// describing the 64³ cone-beam soft-tissue setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub phantom: PhantomBlock,
    pub operator: OperatorBlock,
    pub noise: Option<NoiseSpec>,
    pub reconstruction: ReconConfig,
    pub verify: VerifyBlock,
    pub compare: MetalStudyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            phantom: PhantomBlock::default(),
            operator: OperatorBlock::default(),
            noise: Some(NoiseSpec::storage_f32()),
            reconstruction: ReconConfig::new(Method::Nonlinear, 500, VOLUME_LAMBDA),
            verify: VerifyBlock::default(),
            compare: MetalStudyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomBlock {
    /// Load this volume instead of rasterizing a phantom.
    pub path: Option<PathBuf>,
    pub dims: Vec<usize>,
    /// Physical voxel pitch, shared with the operator.
    pub voxel: f64,
    pub preset: Option<DensityPreset>,
    pub density_scale: Option<f64>,
    pub test_ellipsoid_density: Option<f64>,
    pub test_ellipsoid_enlargement: Option<f64>,
}

impl Default for PhantomBlock {
    fn default() -> Self {
        Self {
            path: None,
            dims: vec![64, 64, 64],
            voxel: 0.2,
            preset: Some(DensityPreset::Soft),
            density_scale: None,
            test_ellipsoid_density: None,
            test_ellipsoid_enlargement: None,
        }
    }
}

impl PhantomBlock {
    pub fn phantom_config(&self) -> PhantomConfig {
        let mut cfg = match self.preset {
            Some(p) => PhantomConfig::preset(self.dims.clone(), p),
            None => PhantomConfig::new(self.dims.clone()),
        };
        if let Some(s) = self.density_scale {
            cfg.density_scale = s;
        }
        if let Some(d) = self.test_ellipsoid_density {
            cfg.test_ellipsoid_density = Some(d);
        }
        if let Some(e) = self.test_ellipsoid_enlargement {
            cfg.test_ellipsoid_enlargement = e;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.voxel > 0.0 && self.voxel.is_finite()) {
            return Err(Error::Domain(format!("phantom.voxel must be > 0, got {}", self.voxel)));
        }
        if self.path.is_none() {
            self.phantom_config().validate().map_err(|e| match e {
                Error::Shape(m) => Error::Shape(format!("at `phantom.dims`: {m}")),
                other => other,
            })?;
        }
        Ok(())
    }

    /// The volume on a grid of pitch `voxel`.
    pub fn build(&self) -> Result<Signal> {
        self.validate()?;
        let raw = match &self.path {
            Some(p) => read_volume(p)?,
            None => shepp_logan(&self.phantom_config())?,
        };
        let grid = raw.grid().expect("volumes carry a grid");
        let spacing = vec![self.voxel; grid.rank()];
        let grid = Grid::new(grid.dims.clone(), spacing)?;
        Signal::with_grid(raw.into_values(), grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorBlock {
    Gaussian {
        m: usize,
    },
    Radon2d {
        #[serde(default = "default_angles")]
        angles: usize,
        #[serde(default)]
        geometry: Option<ParallelBeamGeometry>,
    },
    ConeBeam {
        #[serde(default = "default_views")]
        views: usize,
        #[serde(default = "default_detector")]
        detector: usize,
        #[serde(default)]
        geometry: Option<ConeBeamGeometry>,
    },
}

fn default_angles() -> usize {
    400
}

fn default_views() -> usize {
    60
}

fn default_detector() -> usize {
    64
}

impl Default for OperatorBlock {
    fn default() -> Self {
        OperatorBlock::ConeBeam { views: default_views(), detector: default_detector(), geometry: None }
    }
}

impl OperatorBlock {
    /// Operator acting on volumes of `grid`. Projectors are assembled once
    /// since every command applies them many times.
    pub fn build(&self, grid: &Grid, seed: u64) -> Result<Box<dyn LinearOperator>> {
        let h = grid.spacing[0];
        match (self, &grid.dims[..]) {
            (OperatorBlock::Gaussian { m }, _) => Ok(Box::new(GaussianOperator::new(*m, grid.len(), seed)?)),
            (OperatorBlock::Radon2d { angles, geometry }, &[nx, ny]) if nx == ny => {
                let geo = geometry.clone().unwrap_or_else(|| {
                    let bins = (std::f64::consts::SQRT_2 * nx as f64).ceil() as usize + 2;
                    ParallelBeamGeometry::uniform(*angles, bins, h)
                });
                Ok(Box::new(Radon2dOperator::new(geo, nx, h)?.assemble()?))
            }
            (OperatorBlock::ConeBeam { views, detector, geometry }, &[nx, ny, nz]) => {
                let geo = geometry
                    .clone()
                    .unwrap_or_else(|| circular_scan(nx.max(ny).max(nz), h, *views, *detector));
                Ok(Box::new(ConeBeamOperator::new(geo, [nx, ny, nz], h)?.assemble()?))
            }
            (op, dims) => Err(Error::Shape(format!(
                "operator {} does not fit volume dims {dims:?}",
                op.name()
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            OperatorBlock::Gaussian { .. } => "gaussian",
            OperatorBlock::Radon2d { .. } => "radon2d (square 2D grids)",
            OperatorBlock::ConeBeam { .. } => "cone_beam (3D grids)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    /// Monte Carlo draws for the correlation and width estimates.
    pub samples: usize,
    pub norms: Vec<f64>,
    pub first_step_trials: usize,
    pub smoothness_trials: usize,
    pub phase_trials: usize,
    /// Phase-transition grid as multiples of the estimated m₀.
    pub phase_multiples: Vec<f64>,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        Self {
            samples: 50_000,
            norms: vec![0.5, 1.0, 2.0],
            first_step_trials: 200,
            smoothness_trials: 1000,
            phase_trials: 20,
            phase_multiples: vec![0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
        }
    }
}

impl VerifyBlock {
    /// The reduced budget behind `--quick`.
    pub fn quick(&self) -> Self {
        Self {
            samples: self.samples.min(10_000),
            first_step_trials: self.first_step_trials.min(50),
            smoothness_trials: self.smoothness_trials.min(200),
            phase_trials: self.phase_trials.min(6),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 || self.first_step_trials == 0 || self.smoothness_trials == 0 || self.phase_trials == 0 {
            return Err(Error::Domain("verify sample and trial counts must be positive".into()));
        }
        if self.norms.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Domain("verify.norms must be positive".into()));
        }
        if self.phase_multiples.is_empty() || self.phase_multiples.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::Domain("verify.phase_multiples must be positive".into()));
        }
        Ok(())
    }
}

/// Parse a config file. Unknown keys and type errors carry the JSON path
/// of the offending field.
pub fn load(path: &Path) -> std::result::Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> std::result::Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
    Ok(cfg)
}
