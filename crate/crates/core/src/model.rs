//! Beer-Lambert measurement model and least-squares loss.
//!
//! Measurements follow `yᵢ = f(aᵢᵀx)` with `f(t) = 1 - exp(-max(t, 0))`.
//! The ReLU-wrapped form is used everywhere, including for ray operators
//! whose rows are nonnegative (where it coincides with the bare exponential
//! model on nonnegative volumes).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};
use crate::operators::LinearOperator;
use crate::rng;

/// Largest value below one a stored f64 measurement may take.
pub const Y_MAX_F64: f64 = 1.0 - f64::EPSILON;
/// Largest f32 below one (1 - 2⁻²⁴).
pub const Y_MAX_F32: f64 = 1.0 - 1.0 / 16_777_216.0;

/// Largest double below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// `f(t) = 1 - exp(-t₊)`, unchecked. Saturates at the largest double below
/// one instead of rounding up to one for `t ≳ 37`.
#[inline]
pub fn attenuation(t: f64) -> f64 {
    if t > 0.0 {
        (-(-t).exp_m1()).min(BELOW_ONE)
    } else {
        0.0
    }
}

/// Subgradient of [`attenuation`]: 0 below zero, ½ at zero, `exp(-t)` above.
#[inline]
pub fn attenuation_slope(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp()
    } else if t < 0.0 {
        0.0
    } else {
        0.5
    }
}

pub fn beer_lambert(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("beer_lambert: non-finite input {t}")));
    }
    Ok(attenuation(t))
}

pub fn beer_lambert_subgrad(t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("beer_lambert_subgrad: non-finite input {t}")));
    }
    Ok(attenuation_slope(t))
}

/// Regular grid geometry, x-fastest storage order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: Vec<usize>,
    pub spacing: Vec<f64>,
}

impl Grid {
    pub fn new(dims: Vec<usize>, spacing: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::Shape(format!("grid must have 1 to 3 axes, got {}", dims.len())));
        }
        if dims.len() != spacing.len() {
            return Err(Error::Shape("grid dims and spacing differ in length".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Shape(format!("grid dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::Shape(format!("grid spacing must be positive, got {spacing:?}")));
        }
        Ok(Self { dims, spacing })
    }

    /// Isotropic grid with `rank` axes of `n` cells of size `h`.
    pub fn cubic(rank: usize, n: usize, h: f64) -> Result<Self> {
        Self::new(vec![n; rank], vec![h; rank])
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = Vec::with_capacity(self.dims.len());
        let mut s = 1;
        for &d in &self.dims {
            strides.push(s);
            s *= d;
        }
        strides
    }
}

/// The unknown density, optionally tied to a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    values: Vec<f64>,
    grid: Option<Grid>,
    nonneg: bool,
}

impl Signal {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, grid: None, nonneg: false }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn with_grid(values: Vec<f64>, grid: Grid) -> Result<Self> {
        shape_check("signal values vs grid", grid.len(), values.len())?;
        Ok(Self { values, grid: Some(grid), nonneg: false })
    }

    /// Mark the signal nonnegative; fails if any entry is negative.
    pub fn into_nonneg(mut self) -> Result<Self> {
        if let Some((i, v)) = self.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::Domain(format!("entry {i} is negative ({v})")));
        }
        self.nonneg = true;
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn is_nonneg(&self) -> bool {
        self.nonneg
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }
}

/// Storage precision of recorded measurements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Storage {
    #[default]
    F64,
    F32,
}

/// Optional perturbations applied after the nonlinearity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantize_bits: Option<u32>,
    #[serde(default)]
    pub storage: Storage,
}

impl NoiseSpec {
    pub fn storage_f32() -> Self {
        Self { storage: Storage::F32, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if let Some(s) = self.gaussian_sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Domain(format!("noise sigma must be >= 0, got {s}")));
            }
        }
        if let Some(b) = self.quantize_bits {
            if !(1..=52).contains(&b) {
                return Err(Error::Domain(format!("quantize_bits must be in 1..=52, got {b}")));
            }
        }
        Ok(())
    }
}

/// Raw nonlinear observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub y: Vec<f64>,
    pub op_id: String,
    pub seed: u64,
    pub noise: Option<NoiseSpec>,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }
}

/// Simulate `yᵢ = f(aᵢᵀx)` followed by the optional noise chain:
/// additive Gaussian, quantization, clamping to `[0, 1)` and storage
/// rounding. The noise stream is keyed by `seed`.
pub fn measure(
    op: &dyn LinearOperator,
    x: &[f64],
    noise: Option<&NoiseSpec>,
    seed: u64,
) -> Result<MeasurementSet> {
    let mut y = op.apply(x)?;
    y.iter_mut().for_each(|v| *v = attenuation(*v));
    if let Some(spec) = noise {
        spec.validate()?;
        apply_noise(&mut y, spec, seed);
    }
    Ok(MeasurementSet { y, op_id: op.id(), seed, noise: noise.cloned() })
}

fn apply_noise(y: &mut [f64], spec: &NoiseSpec, seed: u64) {
    if let Some(sigma) = spec.gaussian_sigma.filter(|s| *s > 0.0) {
        let mut rng = rng::stream(seed, rng::NOISE_STREAM);
        for v in y.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += sigma * e;
        }
    }
    if let Some(bits) = spec.quantize_bits {
        let levels = ((1u64 << bits) - 1) as f64;
        for v in y.iter_mut() {
            *v = (*v * levels).round() / levels;
        }
    }
    for v in y.iter_mut() {
        *v = v.clamp(0.0, Y_MAX_F64);
    }
    if spec.storage == Storage::F32 {
        for v in y.iter_mut() {
            *v = (*v as f32 as f64).min(Y_MAX_F32);
        }
    }
}

/// Which measurement model a loss is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardModel {
    /// `(1/2m) Σ (yᵢ - f(aᵢᵀz))²`
    Nonlinear,
    /// `(1/2m) Σ (ŷᵢ - aᵢᵀz)²` on log-preprocessed data
    Linear,
}

impl ForwardModel {
    /// Loss value and the per-row weights `wᵢ` such that `∇L = Aᵀw`,
    /// from the projections `p = Az`.
    pub fn residual(self, p: &[f64], data: &[f64], weights: &mut [f64]) -> f64 {
        let m = p.len() as f64;
        let mut sum = 0.0;
        match self {
            ForwardModel::Nonlinear => {
                for ((w, &pi), &yi) in weights.iter_mut().zip(p).zip(data) {
                    let r = attenuation(pi) - yi;
                    sum += r * r;
                    *w = attenuation_slope(pi) * r / m;
                }
            }
            ForwardModel::Linear => {
                for ((w, &pi), &yi) in weights.iter_mut().zip(p).zip(data) {
                    let r = pi - yi;
                    sum += r * r;
                    *w = r / m;
                }
            }
        }
        sum / (2.0 * m)
    }

    /// Loss value only.
    pub fn loss_value(self, p: &[f64], data: &[f64]) -> f64 {
        let m = p.len() as f64;
        let sum: f64 = match self {
            ForwardModel::Nonlinear => {
                p.iter().zip(data).map(|(&pi, &yi)| (attenuation(pi) - yi).powi(2)).sum()
            }
            ForwardModel::Linear => p.iter().zip(data).map(|(&pi, &yi)| (pi - yi).powi(2)).sum(),
        };
        sum / (2.0 * m)
    }
}

fn check_problem(op: &dyn LinearOperator, y: &[f64], z: &[f64]) -> Result<()> {
    shape_check("measurements vs operator rows", op.rows(), y.len())?;
    shape_check("iterate vs operator columns", op.cols(), z.len())
}

/// `L(z) = (1/2m) Σ (yᵢ - f(aᵢᵀz))²`.
pub fn loss(op: &dyn LinearOperator, y: &[f64], z: &[f64]) -> Result<f64> {
    check_problem(op, y, z)?;
    let p = op.apply(z)?;
    Ok(ForwardModel::Nonlinear.loss_value(&p, y))
}

/// `∇L(z) = (1/m) Σ aᵢ f'(aᵢᵀz) (f(aᵢᵀz) - yᵢ)`, with `f'(0) = ½`.
pub fn grad_loss(op: &dyn LinearOperator, y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    Ok(loss_and_grad(ForwardModel::Nonlinear, op, y, z)?.1)
}

pub fn loss_and_grad(
    model: ForwardModel,
    op: &dyn LinearOperator,
    data: &[f64],
    z: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_problem(op, data, z)?;
    let p = op.apply(z)?;
    let mut w = vec![0.0; p.len()];
    let value = model.residual(&p, data, &mut w);
    Ok((value, op.apply_transpose(&w)?))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{GaussianOperator, SparseMatrix};
    use proptest::prelude::*;

    fn dense(rows: &[&[f64]]) -> SparseMatrix {
        let n = rows[0].len();
        SparseMatrix::from_rows(
            n,
            rows.iter()
                .map(|r| r.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn nonlinearity_examples() {
        assert_eq!(beer_lambert(0.0).unwrap(), 0.0);
        assert_eq!(beer_lambert(-3.0).unwrap(), 0.0);
        assert!((beer_lambert(std::f64::consts::LN_2).unwrap() - 0.5).abs() < 1e-16);
        assert!(beer_lambert(f64::NAN).is_err());
        assert!(beer_lambert(f64::INFINITY).is_err());
    }

    #[test]
    fn subgradient_examples() {
        assert_eq!(beer_lambert_subgrad(-1.0).unwrap(), 0.0);
        assert_eq!(beer_lambert_subgrad(0.0).unwrap(), 0.5);
        assert!((beer_lambert_subgrad(std::f64::consts::LN_2).unwrap() - 0.5).abs() < 1e-16);
        assert!(beer_lambert_subgrad(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn measure_examples() {
        let op = GaussianOperator::new(7, 3, 11).unwrap();
        let y = measure(&op, &[0.0; 3], None, 0).unwrap();
        assert!(y.y.iter().all(|&v| v == 0.0));

        let single = dense(&[&[1.0]]);
        let y = measure(&single, &[std::f64::consts::LN_2], None, 0).unwrap();
        assert!((y.y[0] - 0.5).abs() < 1e-16);

        // 1 - e^-1 at 20 digits: 0.63212055882855767840
        let two = dense(&[&[1.0, 0.0], &[0.0, -5.0]]);
        let y = measure(&two, &[1.0, 1.0], None, 0).unwrap();
        assert!((y.y[0] - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert_eq!(y.y[1], 0.0);

        assert!(matches!(measure(&two, &[1.0], None, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn measure_is_deterministic_with_noise() {
        let op = GaussianOperator::new(50, 10, 3).unwrap();
        let x: Vec<f64> = (0..10).map(|i| 0.1 * i as f64).collect();
        let noise = NoiseSpec { gaussian_sigma: Some(0.01), quantize_bits: Some(12), ..Default::default() };
        let a = measure(&op, &x, Some(&noise), 99).unwrap();
        let b = measure(&op, &x, Some(&noise), 99).unwrap();
        assert_eq!(a, b);
        assert!(a.y.iter().all(|&v| (0.0..1.0).contains(&v)));
        let c = measure(&op, &x, Some(&noise), 100).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn f32_storage_stays_below_one() {
        let op = dense(&[&[1.0], &[1.0], &[1.0]]);
        for t in [0.3, 17.0, 60.0] {
            let y = measure(&op, &[t], Some(&NoiseSpec::storage_f32()), 0).unwrap();
            assert!(y.y[0] < 1.0);
            assert_eq!(y.y[0], y.y[0] as f32 as f64);
        }
        let y = measure(&op, &[60.0], Some(&NoiseSpec::storage_f32()), 0).unwrap();
        assert_eq!(y.y[0], Y_MAX_F32);
    }

    #[test]
    fn loss_examples() {
        let op = GaussianOperator::new(40, 5, 1).unwrap();
        let x = [0.2, -0.1, 0.4, 0.0, 0.3];
        let y = measure(&op, &x, None, 0).unwrap();
        assert!(loss(&op, &y.y, &x).unwrap() < 1e-24);
        assert_eq!(loss(&op, &vec![0.0; 40], &[0.0; 5]).unwrap(), 0.0);

        // two rows whose projections are <= 0 give f-values [0, 0]
        let neg = dense(&[&[-1.0, 0.0], &[0.0, -1.0]]);
        let l = loss(&neg, &[0.5, 0.0], &[1.0, 1.0]).unwrap();
        assert!((l - 0.0625).abs() < 1e-16);
    }

    #[test]
    fn gradient_vanishes_at_truth_and_matches_origin_formula() {
        let op = GaussianOperator::new(60, 6, 5).unwrap();
        let x = [0.3, 0.1, -0.2, 0.5, 0.0, 0.2];
        let y = measure(&op, &x, None, 0).unwrap().y;
        let g = grad_loss(&op, &y, &x).unwrap();
        assert!(norm2(&g) < 1e-15);

        // at z = 0: -(1/2m) Σ aᵢ yᵢ
        let g0 = grad_loss(&op, &y, &[0.0; 6]).unwrap();
        let mut want = vec![0.0; 6];
        for (i, yi) in y.iter().enumerate() {
            for (j, w) in want.iter_mut().enumerate() {
                *w -= op.entry(i, j) * yi / (2.0 * 60.0);
            }
        }
        for (a, b) in g0.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        // positive entries keep every projection away from the kink
        let rows: Vec<Vec<(usize, f64)>> = (0..30)
            .map(|i| (0..8).map(|j| (j, 0.05 + ((i * 7 + j * 3) % 11) as f64 * 0.1)).collect())
            .collect();
        let op = SparseMatrix::from_rows(8, rows).unwrap();
        let x: Vec<f64> = (0..8).map(|j| 0.1 + 0.05 * j as f64).collect();
        let y = measure(&op, &x, None, 0).unwrap().y;
        let z: Vec<f64> = (0..8).map(|j| 0.3 - 0.02 * j as f64).collect();
        assert!(op.apply(&z).unwrap().iter().all(|&p| p > 0.01));
        let g = grad_loss(&op, &y, &z).unwrap();
        let step = 1e-6;
        for j in 0..8 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += step;
            zm[j] -= step;
            let fd = (loss(&op, &y, &zp).unwrap() - loss(&op, &y, &zm).unwrap()) / (2.0 * step);
            assert!(((g[j] - fd) / g[j]).abs() < 1e-5, "coord {j}: {} vs {fd}", g[j]);
        }
    }

    proptest! {
        #[test]
        fn nonlinearity_is_monotone_and_one_lipschitz(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let (fa, fb) = (beer_lambert(a).unwrap(), beer_lambert(b).unwrap());
            prop_assert!((0.0..1.0).contains(&fa));
            if a <= b { prop_assert!(fa <= fb); }
            prop_assert!((fa - fb).abs() <= (a - b).abs() + 1e-15);
        }

        #[test]
        fn subgradient_in_unit_interval(t in -1e3f64..1e3) {
            let d = beer_lambert_subgrad(t).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
