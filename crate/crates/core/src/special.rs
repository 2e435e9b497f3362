//! Complementary error function and its scaled form.
//!
//! `erfc` is the fdlibm rational approximation (via `libm`), accurate to a
//! few ulp over the whole real line. Formulas such as `exp(t²/2)·erfc(t/√2)`
//! overflow/underflow long before they become uninteresting, so the scaled
//! function `erfcx(x) = exp(x²)·erfc(x)` is provided as well: it is the
//! product of the two factors for moderate `x` and a Laplace continued
//! fraction beyond that.

use std::f64::consts::PI;

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Crossover above which the continued fraction is used.
const ERFCX_CF_START: f64 = 5.0;
/// Depth of the backward-evaluated continued fraction; at x >= 5 the
/// truncation error is far below one ulp.
const ERFCX_CF_DEPTH: usize = 80;

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < ERFCX_CF_START {
        if x < -26.0 {
            return f64::INFINITY;
        }
        return (x * x).exp() * erfc(x);
    }
    // erfc(x) = exp(-x²)/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut tail = x;
    for k in (1..=ERFCX_CF_DEPTH).rev() {
        tail = x + (k as f64 / 2.0) / tail;
    }
    1.0 / (PI.sqrt() * tail)
}
