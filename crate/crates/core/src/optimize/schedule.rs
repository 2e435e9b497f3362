use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::erfcx;

/// `μ₁ = 4 exp(-‖x‖²/2) / erfc(‖x‖/√2)`, evaluated as `4 / erfcx(‖x‖/√2)` so
/// it stays finite for large norms.
pub fn step_size_mu1(norm_x: f64) -> Result<f64> {
    if !(norm_x >= 0.0) || !norm_x.is_finite() {
        return Err(Error::Domain(format!("step_size_mu1: need finite norm >= 0, got {norm_x}")));
    }
    Ok(4.0 / erfcx(norm_x / std::f64::consts::SQRT_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    /// `μ₁` from the norm, then `μ·e^{-5‖x‖}`.
    Theorem,
    /// `μ` at every iteration.
    Constant,
    /// `mu1` for the first iteration, `mu` afterwards.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSchedule {
    pub mu1: f64,
    pub mu: f64,
    pub norm_x: f64,
    pub mode: StepMode,
}

impl StepSchedule {
    pub fn theorem(norm_x: f64, mu: f64) -> Result<Self> {
        let s = Self { mu1: step_size_mu1(norm_x)?, mu, norm_x, mode: StepMode::Theorem };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(mu: f64) -> Result<Self> {
        let s = Self { mu1: mu, mu, norm_x: 0.0, mode: StepMode::Constant };
        s.validate()?;
        Ok(s)
    }

    pub fn custom(mu1: f64, mu: f64) -> Result<Self> {
        let s = Self { mu1, mu, norm_x: 0.0, mode: StepMode::Custom };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.mu) || !ok(self.mu1) {
            return Err(Error::Domain(format!(
                "step sizes must be finite and > 0 (mu1 {}, mu {})",
                self.mu1, self.mu
            )));
        }
        if self.mode == StepMode::Theorem {
            let expected = step_size_mu1(self.norm_x)?;
            if (self.mu1 - expected).abs() > 1e-12 * expected {
                return Err(Error::Domain(format!(
                    "theorem schedule: mu1 {} does not match norm {} (expected {expected})",
                    self.mu1, self.norm_x
                )));
            }
        }
        Ok(())
    }

    /// Step size of iteration `t ≥ 1`.
    pub fn step(&self, t: usize) -> f64 {
        match (self.mode, t) {
            (StepMode::Constant, _) => self.mu,
            (_, 1) => self.mu1,
            (StepMode::Theorem, _) => self.mu * (-5.0 * self.norm_x).exp(),
            (StepMode::Custom, _) => self.mu,
        }
    }
}
