//! Intelligent driver model car-following law.
// https://en.wikipedia.org/wiki/Intelligent_driver_model

use serde::{Deserialize, Serialize};

use super::{require_non_negative, require_positive, Actuation, Command, Decision, ModelKind, Rationale, SafetyModel, StepContext};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct IdmParams<T = f64> {
    pub desired_speed_mps: T,
    pub time_headway_s: T,
    pub min_spacing_m: T,
    pub max_accel_mps2: T,
    pub comfortable_decel_mps2: T,
    pub exponent: T,
}

impl<T: Scalar> Default for IdmParams<T> {
    fn default() -> Self {
        Self {
            desired_speed_mps: T::lit(30.0),
            time_headway_s: T::lit(1.5),
            min_spacing_m: T::lit(2.0),
            max_accel_mps2: T::lit(1.5),
            comfortable_decel_mps2: T::lit(2.0),
            exponent: T::lit(4.0),
        }
    }
}

impl<T: Scalar> IdmParams<T> {
    pub fn validate(&self) -> Result<()> {
        require_positive("idm.desired_speed_mps", self.desired_speed_mps)?;
        require_positive("idm.time_headway_s", self.time_headway_s)?;
        require_non_negative("idm.min_spacing_m", self.min_spacing_m)?;
        require_positive("idm.max_accel_mps2", self.max_accel_mps2)?;
        require_positive("idm.comfortable_decel_mps2", self.comfortable_decel_mps2)?;
        require_positive("idm.exponent", self.exponent)
    }

    /// Hard floor on the output, `-2 b`.
    pub fn emergency_decel_mps2(&self) -> T {
        T::two() * self.comfortable_decel_mps2
    }
}

/// Acceleration without a leader.
pub fn idm_free_acceleration<T: Scalar>(v_mps: T, p: &IdmParams<T>) -> T {
    let a = p.max_accel_mps2 * (T::one() - (v_mps / p.desired_speed_mps).powf(p.exponent));
    a.max(-p.emergency_decel_mps2())
}

/// Acceleration behind a leader `gap_m` ahead, closing at `rel_vel_mps`.
///
/// The dynamic part of the desired gap is floored at zero, so an opening
/// gap never shrinks it below the minimum spacing.
pub fn idm_acceleration<T: Scalar>(v_mps: T, gap_m: T, rel_vel_mps: T, p: &IdmParams<T>) -> Result<T> {
    if !(gap_m > T::zero()) {
        return Err(Error::invalid(format!("IDM gap must be > 0, got {gap_m}")));
    }
    let dynamic = v_mps * p.time_headway_s
        + v_mps * rel_vel_mps / (T::two() * (p.max_accel_mps2 * p.comfortable_decel_mps2).sqrt());
    let s_star = p.min_spacing_m + dynamic.max(T::zero());
    let ratio = s_star / gap_m;
    let a = p.max_accel_mps2 * (T::one() - (v_mps / p.desired_speed_mps).powf(p.exponent) - ratio * ratio);
    Ok(a.max(-p.emergency_decel_mps2()))
}

#[derive(Debug, Clone)]
pub struct IdmController<T> {
    params: IdmParams<T>,
}

impl<T: Scalar> IdmController<T> {
    pub fn new(params: IdmParams<T>) -> Self {
        Self { params }
    }
}

impl<T: Scalar> SafetyModel<T> for IdmController<T> {
    fn kind(&self) -> ModelKind {
        ModelKind::Idm
    }

    fn command(&mut self, ctx: &StepContext<T>) -> Command<T> {
        let p = &self.params;
        let v = ctx.ego.vel_long_mps;
        let accel = if ctx.in_path() && ctx.other_ahead() {
            let rel = v - ctx.other.vel_long_mps;
            idm_acceleration(v, ctx.gap_long(), rel, p).unwrap_or(-p.emergency_decel_mps2())
        } else {
            idm_free_acceleration(v, p)
        };
        let decision = if accel >= T::zero() {
            Decision::safe(Rationale::Safe)
        } else {
            Decision::unsafe_with(Rationale::LongitudinalFail, -accel)
        };
        Command {
            decision,
            actuation: Actuation::Accel(accel),
        }
    }
}
