//! Two-dimensional Monte Carlo expectations behind the correlation lower
//! bounds. A pair `(u, v)` of independent standard normals stands for
//! `(aᵀx/‖x‖, ·)`, and `aᵀĥ` is built as `c·u + √(1-c²)·v` for a
//! correlation `c` between `x` and the unit direction `ĥ`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::BoundReport;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{mean_se, MeanSe};

/// Correlation grid size for the sweeps.
pub const CORRELATION_POINTS: usize = 50;

/// Tent `S(v; w)`: ramps up on `[0, w/2]`, down on `[w/2, w]`, zero elsewhere.
pub fn tent(v: f64, w: f64) -> f64 {
    if v < 0.0 || v > w {
        0.0
    } else if v <= w / 2.0 {
        v
    } else {
        w - v
    }
}

pub fn case1_bound(norm_x: f64) -> f64 {
    (-(10.0 * norm_x + 7.0).sqrt()).exp()
}

pub fn case2_bound(norm_x: f64) -> f64 {
    (-(5.0 * norm_x + 2.0)).exp()
}

/// `α = ½ e^{-(5‖x‖+2)}`.
pub fn combined_alpha(norm_x: f64) -> f64 {
    0.5 * case2_bound(norm_x)
}

/// First grid point from which the case-2 bound stays below the case-1
/// bound, or `None` if it never does on the grid.
pub fn bound_crossover(grid: &[f64]) -> Option<f64> {
    let mut first = None;
    for &t in grid {
        if case2_bound(t) <= case1_bound(t) {
            first.get_or_insert(t);
        } else {
            first = None;
        }
    }
    first
}

fn draws(samples: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut r = rng::stream(seed, 0);
    (0..samples).map(|_| (r.sample(StandardNormal), r.sample(StandardNormal))).collect()
}

fn check(norm_x: f64, r: f64, samples: usize) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("r must be > 0, got {r}")));
    }
    if !(norm_x >= 0.0) || !norm_x.is_finite() {
        return Err(Error::Domain(format!("norm must be >= 0, got {norm_x}")));
    }
    if samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    Ok(())
}

fn case1_integrand(norm_x: f64, r: f64, c: f64, u: f64, v: f64) -> f64 {
    let w = c * u + (1.0 - c * c).max(0.0).sqrt() * v;
    if u < 0.0 || w < 0.0 {
        return 0.0;
    }
    let e = (-r * w).exp();
    // (1 - e^{-rw})/r without cancellation for small r
    (-2.0 * norm_x * u).exp() * e * (-(-r * w).exp_m1() / r) * w
}

fn case2_integrand(norm_x: f64, r: f64, c: f64, u: f64, v: f64) -> f64 {
    if u < 0.0 {
        return 0.0;
    }
    let w = -(c * u + (1.0 - c * c).max(0.0).sqrt() * v);
    tent(w, norm_x * u / r) * (-norm_x * u).exp()
}

/// `E[1{u≥0} 1{w≥0} e^{-2‖x‖u} e^{-rw}(1 - e^{-rw}) w / r]` at one correlation.
pub fn case1_expectation(norm_x: f64, r: f64, c: f64, samples: usize, seed: u64) -> Result<MeanSe> {
    check(norm_x, r, samples)?;
    Ok(mean_se(draws(samples, seed).into_iter().map(|(u, v)| case1_integrand(norm_x, r, c, u, v))))
}

/// `E[1{u≥0} S(w; ‖x‖u/r) e^{-‖x‖u}]²` at one correlation, with a
/// delta-method standard error.
pub fn case2_expectation(norm_x: f64, r: f64, c: f64, samples: usize, seed: u64) -> Result<MeanSe> {
    check(norm_x, r, samples)?;
    Ok(squared(mean_se(draws(samples, seed).into_iter().map(|(u, v)| case2_integrand(norm_x, r, c, u, v)))))
}

/// Minimize `estimate(c)` over an evenly spaced correlation grid.
#[allow(clippy::too_many_arguments)]
fn sweep<F>(quantity: &str, norm_x: f64, r: f64, rho: f64, range: (f64, f64), bound: f64, samples: usize, seed: u64, estimate: F) -> BoundReport
where
    F: Fn(f64) -> MeanSe,
{
    let mut best: Option<(f64, MeanSe)> = None;
    for k in 0..CORRELATION_POINTS {
        let c = range.0 + (range.1 - range.0) * k as f64 / (CORRELATION_POINTS - 1) as f64;
        let est = estimate(c);
        if best.is_none_or(|(_, b)| est.mean < b.mean) {
            best = Some((c, est));
        }
    }
    let (c_min, est) = best.expect("nonempty grid");
    let params = BTreeMap::from([
        ("norm_x".to_string(), norm_x),
        ("r".to_string(), r),
        ("rho".to_string(), rho),
        ("c_min".to_string(), c_min),
    ]);
    BoundReport::new(quantity, params, est, bound, samples, seed)
}

fn squared(inner: MeanSe) -> MeanSe {
    MeanSe { mean: inner.mean * inner.mean, se: 2.0 * inner.mean.abs() * inner.se, n: inner.n }
}

/// Case 1: minimum over `c ∈ [ρ, 1]` compared with `e^{-√(10‖x‖+7)}`.
pub fn correlation_bound_case1(norm_x: f64, r: f64, rho: f64, samples: usize, seed: u64) -> Result<BoundReport> {
    check(norm_x, r, samples)?;
    let pairs = draws(samples, seed);
    Ok(sweep("correlation_case1", norm_x, r, rho, (rho, 1.0), case1_bound(norm_x), samples, seed, |c| {
        mean_se(pairs.iter().map(|&(u, v)| case1_integrand(norm_x, r, c, u, v)))
    }))
}

/// Case 2: minimum over `c ∈ [-1, ρ]` of the squared tent expectation,
/// compared with `e^{-(5‖x‖+2)}`.
pub fn correlation_bound_case2(norm_x: f64, r: f64, rho: f64, samples: usize, seed: u64) -> Result<BoundReport> {
    check(norm_x, r, samples)?;
    let pairs = draws(samples, seed);
    Ok(sweep("correlation_case2", norm_x, r, rho, (-1.0, rho), case2_bound(norm_x), samples, seed, |c| {
        squared(mean_se(pairs.iter().map(|&(u, v)| case2_integrand(norm_x, r, c, u, v))))
    }))
}
