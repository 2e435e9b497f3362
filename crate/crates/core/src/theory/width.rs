//! Squared Gaussian widths (statistical dimensions) of descent cones.
//!
//! For the ℓ1 descent cone at an `s`-sparse anchor with sign pattern `σ`,
//! the squared supremum over the cone ∩ ball for a draw `g` is computed as
//! the squared distance from `g` to the cone generated by the
//! subdifferential:
//!
//! `min_{τ≥0} Σ_S (gᵢ - τσᵢ)² + Σ_{Sᶜ} (|gᵢ| - τ)₊²`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{mean_se, MeanSe};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConeSpec {
    FullSpace { n: usize },
    /// Anchor supported on the first `s` coordinates with positive signs;
    /// the distribution of `g` makes the choice immaterial.
    L1Sparse { n: usize, s: usize },
}

impl ConeSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConeSpec::FullSpace { n: 0 } => Err(Error::Domain("ambient dimension must be >= 1".into())),
            ConeSpec::L1Sparse { n, s } if s == 0 || s > n => {
                Err(Error::Domain(format!("sparsity must satisfy 1 <= s <= n, got s={s}, n={n}")))
            }
            _ => Ok(()),
        }
    }

    pub fn ambient(&self) -> usize {
        match *self {
            ConeSpec::FullSpace { n } | ConeSpec::L1Sparse { n, .. } => n,
        }
    }
}

/// Squared distance from `g` to the cone over `∂‖·‖₁` at a positive
/// `s`-sparse anchor, minimized exactly over `τ` via the sorted
/// off-support magnitudes.
pub fn l1_cone_distance2(g: &[f64], s: usize) -> f64 {
    let (on, off) = g.split_at(s);
    let sum_on: f64 = on.iter().sum();
    let mut mags: Vec<f64> = off.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    // the objective is convex in τ; its stationary point with k active
    // off-support terms is τ = (Σ_S gᵢ + Σ_{top k} |gᵢ|) / (s + k)
    let mut top = 0.0;
    let mut tau = 0.0;
    for k in 0..=mags.len() {
        if k > 0 {
            top += mags[k - 1];
        }
        let t = (sum_on + top) / (s + k) as f64;
        let upper = if k == 0 { f64::INFINITY } else { mags[k - 1] };
        let lower = mags.get(k).copied().unwrap_or(0.0);
        if t <= upper && t >= lower {
            tau = t.max(0.0);
            break;
        }
    }
    let on_part: f64 = on.iter().map(|v| (v - tau).powi(2)).sum();
    let off_part: f64 = mags.iter().map(|a| (a - tau).max(0.0).powi(2)).sum();
    on_part + off_part
}

/// Monte Carlo estimate of `ω²` (mean of the squared suprema) with its
/// standard error. Draw `k` uses stream `(seed, k)`.
pub fn gaussian_width_m0(cone: &ConeSpec, samples: usize, seed: u64) -> Result<MeanSe> {
    cone.validate()?;
    if samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let n = cone.ambient();
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let g: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
            match *cone {
                ConeSpec::FullSpace { .. } => g.iter().map(|v| v * v).sum(),
                ConeSpec::L1Sparse { s, .. } => l1_cone_distance2(&g, s),
            }
        })
        .collect();
    Ok(mean_se(values))
}
