//! Surrogate safety features (DHW, THW, TTC, ITTC) and the partial
//! derivatives of TTC with respect to gap and closing speed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Closing speeds at or below this floor (m/s) give an infinite TTC.
pub const CLOSING_SPEED_FLOOR_MPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFeatures<T = f64> {
    /// Distance headway, bumper to bumper.
    pub dhw_m: T,
    /// Time headway; infinite when the follower is stopped.
    pub thw_s: T,
    /// Time to collision; infinite when the gap is not closing.
    pub ttc_s: T,
    /// Inverse TTC; zero when the gap is not closing.
    pub ittc_per_s: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult<T = f64> {
    /// dTTC/dd in s/m.
    pub s_long_s_per_m: T,
    /// dTTC/dv_rel in s/(m/s).
    pub s_rel_s2_per_m: T,
}

fn floor<T: Scalar>() -> T {
    T::lit(CLOSING_SPEED_FLOOR_MPS)
}

/// TTC for a non-negative gap and signed closing speed
/// (follower minus leader, positive when closing).
pub fn time_to_collision<T: Scalar>(gap_long_m: T, rel_vel_mps: T) -> T {
    if rel_vel_mps > floor() {
        gap_long_m / rel_vel_mps
    } else {
        T::infinity()
    }
}

/// Features for a leader/follower pair.
///
/// `rel_vel_mps` is follower velocity minus leader velocity. A zero gap
/// while closing yields `ttc = 0` and `ittc = inf` (contact).
pub fn compute_features<T: Scalar>(
    gap_long_m: T,
    follower_vel_mps: T,
    rel_vel_mps: T,
) -> Result<SurrogateFeatures<T>> {
    if !(gap_long_m.is_finite() && follower_vel_mps.is_finite() && rel_vel_mps.is_finite()) {
        return Err(Error::invalid("non-finite feature input"));
    }
    if gap_long_m < T::zero() {
        return Err(Error::invalid(format!(
            "negative gap {gap_long_m} m: vehicles overlap, features undefined"
        )));
    }
    let thw_s = if follower_vel_mps > floor() {
        gap_long_m / follower_vel_mps
    } else {
        T::infinity()
    };
    let ttc_s = time_to_collision(gap_long_m, rel_vel_mps);
    let ittc_per_s = if ttc_s.is_finite() {
        ttc_s.recip()
    } else {
        T::zero()
    };
    Ok(SurrogateFeatures {
        dhw_m: gap_long_m,
        thw_s,
        ttc_s,
        ittc_per_s,
    })
}

/// Analytic partials of `TTC = d / v_rel`.
pub fn ttc_sensitivity<T: Scalar>(gap_long_m: T, rel_vel_mps: T) -> Result<SensitivityResult<T>> {
    if !(gap_long_m.is_finite() && gap_long_m >= T::zero()) {
        return Err(Error::invalid(format!("gap must be finite and >= 0, got {gap_long_m}")));
    }
    if !(rel_vel_mps > floor()) {
        return Err(Error::UndefinedSensitivity {
            rel_vel_mps: rel_vel_mps.to_f64_lossy(),
        });
    }
    Ok(SensitivityResult {
        s_long_s_per_m: rel_vel_mps.recip(),
        s_rel_s2_per_m: -gap_long_m / (rel_vel_mps * rel_vel_mps),
    })
}

/// Central-difference partials of `TTC = d / v_rel` with step `h` in both
/// arguments.
pub fn finite_difference_sensitivity<T: Scalar>(
    gap_long_m: T,
    rel_vel_mps: T,
    h: T,
) -> Result<SensitivityResult<T>> {
    if !(h.is_finite() && h > T::zero()) {
        return Err(Error::invalid(format!("perturbation must be > 0, got {h}")));
    }
    if !gap_long_m.is_finite() {
        return Err(Error::invalid("non-finite gap"));
    }
    if !(rel_vel_mps - h > floor()) {
        return Err(Error::UndefinedSensitivity {
            rel_vel_mps: (rel_vel_mps - h).to_f64_lossy(),
        });
    }
    let ttc = |d: T, v: T| d / v;
    let two_h = T::two() * h;
    Ok(SensitivityResult {
        s_long_s_per_m: (ttc(gap_long_m + h, rel_vel_mps) - ttc(gap_long_m - h, rel_vel_mps)) / two_h,
        s_rel_s2_per_m: (ttc(gap_long_m, rel_vel_mps + h) - ttc(gap_long_m, rel_vel_mps - h)) / two_h,
    })
}
