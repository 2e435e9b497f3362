use crate::error::{Error, Result};
use crate::model::MeasurementSet;
use crate::special::erfcx;

const UPPER: f64 = 50.0;

/// Expected measurement `E[1 - e^{-g₊t}]` for `g ~ N(0,1)`:
/// `1 - ½(1 + e^{t²/2} erfc(t/√2))`.
pub fn expected_measurement(t: f64) -> f64 {
    0.5 * (1.0 - erfcx(t / std::f64::consts::SQRT_2))
}

/// Invert [`expected_measurement`] for `t ∈ [0, 50]` by bisection.
pub fn norm_from_mean(mean: f64) -> Result<f64> {
    if !mean.is_finite() || mean >= 1.0 {
        return Err(Error::Domain(format!("mean measurement must lie in [0, 1), got {mean}")));
    }
    let mean = if mean < 0.0 {
        log::warn!("mean measurement {mean} is negative, clamping to 0");
        0.0
    } else {
        mean
    };
    if mean == 0.0 {
        return Ok(0.0);
    }
    if mean >= expected_measurement(UPPER) {
        log::warn!("mean measurement {mean} is beyond the invertible range, returning {UPPER}");
        return Ok(UPPER);
    }
    let (mut lo, mut hi) = (0.0, UPPER);
    while hi - lo >= 1e-10 {
        let mid = 0.5 * (lo + hi);
        if expected_measurement(mid) < mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Estimate `‖x‖` from the mean of Gaussian-operator measurements.
pub fn estimate_signal_norm(y: &MeasurementSet) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Domain("cannot estimate a norm from zero measurements".into()));
    }
    norm_from_mean(y.mean())
}
