use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constraint sets `K` for projected descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSet {
    Unconstrained,
    L1Ball { radius: f64 },
    Nonneg,
    NonnegL1 { radius: f64 },
    /// Accepted in configs so the error is explicit; cannot be projected onto.
    TvBall { radius: f64 },
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConstraintSet::L1Ball { radius } | ConstraintSet::NonnegL1 { radius } => {
                if !(radius > 0.0) {
                    return Err(Error::Domain(format!("constraint radius must be > 0, got {radius}")));
                }
                Ok(())
            }
            ConstraintSet::TvBall { .. } => {
                Err(Error::Unsupported("projection onto a TV ball is not supported".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        let l1 = || v.iter().map(|x| x.abs()).sum::<f64>();
        match *self {
            ConstraintSet::Unconstrained => true,
            ConstraintSet::L1Ball { radius } => l1() <= radius + tol,
            ConstraintSet::Nonneg => v.iter().all(|&x| x >= -tol),
            ConstraintSet::NonnegL1 { radius } => v.iter().all(|&x| x >= -tol) && l1() <= radius + tol,
            ConstraintSet::TvBall { .. } => false,
        }
    }
}

/// Euclidean projection onto `set`.
pub fn project(set: &ConstraintSet, v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    project_in_place(set, &mut out)?;
    Ok(out)
}

pub fn project_in_place(set: &ConstraintSet, v: &mut [f64]) -> Result<()> {
    set.validate()?;
    match *set {
        ConstraintSet::Unconstrained => {}
        ConstraintSet::L1Ball { radius } => l1_ball(v, radius),
        ConstraintSet::Nonneg => clamp_nonneg(v),
        ConstraintSet::NonnegL1 { radius } => {
            // {z ≥ 0, ‖z‖₁ ≤ r} is a capped simplex: clamping first and then
            // thresholding is the exact projection
            clamp_nonneg(v);
            l1_ball(v, radius);
        }
        ConstraintSet::TvBall { .. } => unreachable!("rejected by validate"),
    }
    Ok(())
}

fn clamp_nonneg(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

/// Soft-threshold at the level that lands exactly on the ball boundary.
fn l1_ball(v: &mut [f64], radius: f64) {
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= radius {
        return;
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = x.signum() * (x.abs() - theta).max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    /// Nearest point of the set among a fine 2D grid, refined once.
    fn grid_projection(set: &ConstraintSet, v: [f64; 2]) -> [f64; 2] {
        let mut best = [0.0, 0.0];
        let mut best_d = f64::INFINITY;
        let (mut center, mut half) = ([0.0, 0.0], 4.0);
        for _ in 0..6 {
            let k = 400;
            for i in 0..=k {
                for j in 0..=k {
                    let p = [
                        center[0] - half + 2.0 * half * i as f64 / k as f64,
                        center[1] - half + 2.0 * half * j as f64 / k as f64,
                    ];
                    if set.contains(&p, 0.0) {
                        let d = dist(&p, &v);
                        if d < best_d {
                            best_d = d;
                            best = p;
                        }
                    }
                }
            }
            center = best;
            half /= 40.0;
        }
        best
    }

    #[test]
    fn l1_examples() {
        let set = ConstraintSet::L1Ball { radius: 1.0 };
        assert_eq!(project(&set, &[3.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(project(&set, &[2.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(project(&set, &[0.2, -0.3]).unwrap(), vec![0.2, -0.3]);
        let p = project(&set, &[0.9, -0.8]).unwrap();
        assert!((p[0] - 0.55).abs() < 1e-15 && (p[1] + 0.45).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_grid() {
        let sets = [
            ConstraintSet::L1Ball { radius: 1.0 },
            ConstraintSet::L1Ball { radius: 0.37 },
            ConstraintSet::Nonneg,
            ConstraintSet::NonnegL1 { radius: 1.3 },
        ];
        let points = [[2.0, 1.0], [-1.5, 0.4], [0.3, -2.2], [1.1, 1.05], [-0.7, -0.6], [0.1, 0.2]];
        for set in &sets {
            for v in points {
                let exact = project(set, &v).unwrap();
                let brute = grid_projection(set, v);
                let gap = (exact[0] - brute[0]).abs().max((exact[1] - brute[1]).abs());
                assert!(gap < 1e-6, "{set:?} {v:?}: {exact:?} vs {brute:?}");
            }
        }
    }

    #[test]
    fn invalid_sets() {
        assert!(matches!(
            project(&ConstraintSet::L1Ball { radius: 0.0 }, &[1.0]),
            Err(Error::Domain(_))
        ));
        assert!(project(&ConstraintSet::NonnegL1 { radius: -1.0 }, &[1.0]).is_err());
        assert!(matches!(
            project(&ConstraintSet::TvBall { radius: 1.0 }, &[1.0]),
            Err(Error::Unsupported(_))
        ));
        assert_eq!(project(&ConstraintSet::L1Ball { radius: f64::INFINITY }, &[5.0, -7.0]).unwrap(), vec![5.0, -7.0]);
    }

    #[test]
    fn config_round_trip() {
        let set: ConstraintSet = serde_json::from_str(r#"{"kind": "l1_ball", "radius": 2.5}"#).unwrap();
        assert_eq!(set, ConstraintSet::L1Ball { radius: 2.5 });
        let set: ConstraintSet = serde_json::from_str(r#"{"kind": "nonneg"}"#).unwrap();
        assert_eq!(set, ConstraintSet::Nonneg);
    }

    fn any_set() -> impl Strategy<Value = ConstraintSet> {
        prop_oneof![
            (0.01f64..10.0).prop_map(|radius| ConstraintSet::L1Ball { radius }),
            Just(ConstraintSet::Nonneg),
            (0.01f64..10.0).prop_map(|radius| ConstraintSet::NonnegL1 { radius }),
        ]
    }

    proptest! {
        #[test]
        fn idempotent_and_nonexpansive(
            set in any_set(),
            u in prop::collection::vec(-5.0f64..5.0, 12),
            v in prop::collection::vec(-5.0f64..5.0, 12),
        ) {
            let pu = project(&set, &u).unwrap();
            let pv = project(&set, &v).unwrap();
            prop_assert!(set.contains(&pu, 1e-12));
            let ppu = project(&set, &pu).unwrap();
            prop_assert!(dist(&pu, &ppu) <= 1e-12);
            prop_assert!(dist(&pu, &pv) <= dist(&u, &v) + 1e-12);
        }
    }
}
