//! Gradient descent on the Beer-Lambert least-squares loss, with the
//! step-size schedule, constraint projections, TV penalty and the
//! signal-norm estimator.

mod norm;
mod project;
mod schedule;
mod tv;

pub use norm::{estimate_signal_norm, expected_measurement, norm_from_mean};
pub use project::{project, project_in_place, ConstraintSet};
pub use schedule::{step_size_mu1, StepMode, StepSchedule};
pub use tv::{tv_subgradient, tv_subgradient_on, tv_value, tv_value_on, TV_EPSILON};

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};
use crate::model::{dist2, norm2, ForwardModel, Grid};
use crate::operators::LinearOperator;

pub const DEFAULT_MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    /// `‖zₜ - x‖` when a reference signal was supplied.
    pub err: Option<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub time_ms: f64,
    /// Step actually taken to reach this iterate (0 at t = 0).
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<IterRecord>,
    pub z: Vec<f64>,
    /// Number of step halvings triggered by increases of the data term.
    pub halvings: usize,
    /// Whether the gradient tolerance was reached before `max_iter`.
    pub converged: bool,
}

impl Trajectory {
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn errors(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.err).collect()
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.loss)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,err,loss,grad_norm,time_ms\n");
        for r in &self.records {
            let err = r.err.map(|e| format!("{e:e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{:e},{:e},{}", r.iter, err, r.loss, r.grad_norm, r.time_ms);
        }
        s
    }
}

/// Penalty `λ·TV(z)` over a grid.
#[derive(Debug, Clone)]
pub struct TvPenalty {
    pub lambda: f64,
    pub grid: Grid,
}

/// Full description of a descent run. The plain, projected and regularized
/// drivers are thin wrappers over this.
#[derive(Debug, Clone)]
pub struct Descent {
    pub schedule: StepSchedule,
    pub model: ForwardModel,
    pub max_iter: usize,
    pub tol: f64,
    pub max_halvings: usize,
    pub constraint: ConstraintSet,
    pub tv: Option<TvPenalty>,
    pub record_wall_time: bool,
}

impl Descent {
    pub fn new(schedule: StepSchedule, max_iter: usize, tol: f64) -> Self {
        Self {
            schedule,
            model: ForwardModel::Nonlinear,
            max_iter,
            tol,
            max_halvings: DEFAULT_MAX_HALVINGS,
            constraint: ConstraintSet::Unconstrained,
            tv: None,
            record_wall_time: true,
        }
    }

    pub fn model(mut self, model: ForwardModel) -> Self {
        self.model = model;
        self
    }

    pub fn constraint(mut self, set: ConstraintSet) -> Self {
        self.constraint = set;
        self
    }

    pub fn tv(mut self, lambda: f64, grid: Grid) -> Self {
        self.tv = Some(TvPenalty { lambda, grid });
        self
    }

    pub fn wall_time(mut self, on: bool) -> Self {
        self.record_wall_time = on;
        self
    }

    fn validate(&self, op: &dyn LinearOperator, data: &[f64], x_ref: Option<&[f64]>) -> Result<()> {
        self.schedule.validate()?;
        self.constraint.validate()?;
        if !(self.tol >= 0.0) {
            return Err(Error::Domain(format!("tolerance must be >= 0, got {}", self.tol)));
        }
        shape_check("measurements vs operator rows", op.rows(), data.len())?;
        if let Some(x) = x_ref {
            shape_check("reference signal vs operator columns", op.cols(), x.len())?;
        }
        if let Some(tv) = &self.tv {
            if !(tv.lambda >= 0.0) || !tv.lambda.is_finite() {
                return Err(Error::Domain(format!("lambda must be finite and >= 0, got {}", tv.lambda)));
            }
            shape_check("tv grid vs operator columns", op.cols(), tv.grid.len())?;
        }
        Ok(())
    }

    /// Run from `z₀ = 0`.
    pub fn run(&self, op: &dyn LinearOperator, data: &[f64], x_ref: Option<&[f64]>) -> Result<Trajectory> {
        self.run_from(op, data, vec![0.0; op.cols()], x_ref)
    }

    pub fn run_from(
        &self,
        op: &dyn LinearOperator,
        data: &[f64],
        z0: Vec<f64>,
        x_ref: Option<&[f64]>,
    ) -> Result<Trajectory> {
        self.validate(op, data, x_ref)?;
        shape_check("initial iterate", op.cols(), z0.len())?;
        let start = Instant::now();
        let elapsed = || {
            if self.record_wall_time {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            }
        };
        let (m, n) = (op.rows(), op.cols());
        let mut z = z0;
        let mut p = vec![0.0; m];
        let mut w = vec![0.0; m];
        let mut grad = vec![0.0; n];
        let mut tv_grad = vec![0.0; n];
        let mut cand = vec![0.0; n];

        // (data term, data term + penalty)
        let objective = |z: &[f64], p: &mut [f64], w: &mut [f64]| -> Result<(f64, f64)> {
            op.apply_into(z, p);
            let fit = self.model.residual(p, data, w);
            let mut value = fit;
            if let Some(tv) = &self.tv {
                if tv.lambda > 0.0 {
                    value += tv.lambda * tv_value_on(&tv.grid, z)?;
                }
            }
            Ok((fit, value))
        };
        let gradient = |z: &[f64], w: &[f64], grad: &mut [f64], tv_grad: &mut [f64]| -> Result<()> {
            op.apply_transpose_into(w, grad);
            if let Some(tv) = &self.tv {
                if tv.lambda > 0.0 {
                    tv_subgradient_on(&tv.grid, z, tv_grad)?;
                    grad.iter_mut().zip(tv_grad.iter()).for_each(|(g, t)| *g += tv.lambda * t);
                }
            }
            Ok(())
        };

        let (mut fit, mut value) = objective(&z, &mut p, &mut w)?;
        if !value.is_finite() {
            return Err(Error::Divergence { iteration: 0, reason: format!("loss is {value}") });
        }
        gradient(&z, &w, &mut grad, &mut tv_grad)?;
        let mut gnorm = norm2(&grad);
        let mut records = vec![IterRecord {
            iter: 0,
            err: x_ref.map(|x| dist2(&z, x)),
            loss: value,
            grad_norm: gnorm,
            time_ms: elapsed(),
            step: 0.0,
        }];
        let mut scale = 1.0;
        let mut halvings = 0;
        let mut converged = gnorm <= self.tol;

        for t in 1..=self.max_iter {
            if converged {
                break;
            }
            let base = self.schedule.step(t);
            let (step, cand_fit, cand_value) = loop {
                let step = if t > 1 { base * scale } else { base };
                for ((c, zi), gi) in cand.iter_mut().zip(&z).zip(&grad) {
                    *c = zi - step * gi;
                }
                project_in_place(&self.constraint, &mut cand)?;
                let (f, v) = objective(&cand, &mut p, &mut w)?;
                if !v.is_finite() {
                    return Err(Error::Divergence { iteration: t, reason: format!("loss is {v}") });
                }
                // the smoothed TV term is far stiffer than the data term, so
                // only a rising data term counts as overshooting
                if t > 1 && f > fit + 1e-12 * fit.abs() && halvings < self.max_halvings {
                    scale *= 0.5;
                    halvings += 1;
                    log::debug!("iteration {t}: loss rose to {f:e}, halving step to {:e}", base * scale);
                    continue;
                }
                break (step, f, v);
            };
            std::mem::swap(&mut z, &mut cand);
            fit = cand_fit;
            value = cand_value;
            gradient(&z, &w, &mut grad, &mut tv_grad)?;
            gnorm = norm2(&grad);
            if !gnorm.is_finite() {
                return Err(Error::Divergence { iteration: t, reason: format!("gradient norm is {gnorm}") });
            }
            records.push(IterRecord {
                iter: t,
                err: x_ref.map(|x| dist2(&z, x)),
                loss: value,
                grad_norm: gnorm,
                time_ms: elapsed(),
                step,
            });
            converged = gnorm <= self.tol;
        }
        Ok(Trajectory { records, z, halvings, converged })
    }
}

/// `zₜ = zₜ₋₁ - μₜ∇L(zₜ₋₁)` from `z₀ = 0`.
pub fn gradient_descent(
    op: &dyn LinearOperator,
    y: &[f64],
    schedule: &StepSchedule,
    max_iter: usize,
    tol: f64,
    x_ref: Option<&[f64]>,
) -> Result<Trajectory> {
    Descent::new(schedule.clone(), max_iter, tol).run(op, y, x_ref)
}

/// `zₜ = P_K(zₜ₋₁ - μₜ∇L(zₜ₋₁))`, projecting after every step.
pub fn projected_gradient_descent(
    op: &dyn LinearOperator,
    y: &[f64],
    schedule: &StepSchedule,
    set: &ConstraintSet,
    max_iter: usize,
    tol: f64,
    x_ref: Option<&[f64]>,
) -> Result<Trajectory> {
    Descent::new(schedule.clone(), max_iter, tol).constraint(set.clone()).run(op, y, x_ref)
}

/// Descent on `L(z) + λ·TV(z)` with the iterate clamped to be nonnegative.
pub fn regularized_descent(
    op: &dyn LinearOperator,
    y: &[f64],
    schedule: &StepSchedule,
    lambda: f64,
    grid: &Grid,
    max_iter: usize,
    tol: f64,
) -> Result<Trajectory> {
    Descent::new(schedule.clone(), max_iter, tol)
        .constraint(ConstraintSet::Nonneg)
        .tv(lambda, grid.clone())
        .run(op, y, None)
}
