//! Direct reconstruction of attenuation volumes through the nonlinear
//! Beer-Lambert measurement model `y = 1 - exp(-(a·x)+)`.
//!
//! The crate is organised around a handful of layers:
//!
//! * [`model`]: the nonlinearity, its subgradient, the measurement process
//!   and the least-squares loss with its gradient.
//! * [`operators`]: matrix-free measurement operators (dense Gaussian,
//!   2D parallel-beam Siddon projector, 3D cone-beam trilinear sampler).
//! * [`optimize`]: step schedules, constraint projections, total variation
//!   and the (projected / regularized) gradient descent driver.
//! * [`phantom`]: Shepp-Logan volumes with a graded-density test ellipsoid
//!   and PSNR.
//! * [`theory`]: Monte Carlo checks of first-step concentration, the
//!   correlation lower bounds, smoothness, Gaussian widths and phase
//!   transitions.
//! * [`recon`]: nonlinear and log-linearized reconstruction pipelines,
//!   including the metal-artifact density sweep.
//! * [`io`]: volume, measurement, preview and trajectory file formats.

// Range checks are written `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod model;
pub mod operators;
pub mod optimize;
pub mod phantom;
pub mod recon;
pub mod rng;
pub mod special;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use model::{
    beer_lambert, beer_lambert_subgrad, grad_loss, loss, measure, ForwardModel, Grid,
    MeasurementSet, NoiseSpec, Signal, Storage,
};
pub use operators::{
    ConeBeamGeometry, ConeBeamOperator, GaussianOperator, LinearOperator, OperatorKind,
    ParallelBeamGeometry, Radon2dOperator, SparseMatrix,
};
pub use optimize::{
    estimate_signal_norm, gradient_descent, project, projected_gradient_descent,
    regularized_descent, step_size_mu1, ConstraintSet, StepSchedule, Trajectory,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
