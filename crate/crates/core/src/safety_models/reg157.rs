//! Minimum time-gap following distance in the style of ALKS regulation.

use serde::{Deserialize, Serialize};

use super::{require_non_negative, require_positive, Command, Decision, ModelKind, Rationale, SafetyModel, StepContext};
use crate::error::Result;
use crate::kinematics::{gap_lateral, gap_longitudinal, VehicleDims, VehicleState};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Reg157Params<T = f64> {
    pub min_time_gap_s: T,
    pub min_standstill_gap_m: T,
    pub brake_mps2: T,
}

impl<T: Scalar> Default for Reg157Params<T> {
    fn default() -> Self {
        Self {
            min_time_gap_s: T::lit(1.0),
            min_standstill_gap_m: T::lit(2.0),
            brake_mps2: T::lit(6.0),
        }
    }
}

impl<T: Scalar> Reg157Params<T> {
    pub fn validate(&self) -> Result<()> {
        require_positive("reg157.min_time_gap_s", self.min_time_gap_s)?;
        require_non_negative("reg157.min_standstill_gap_m", self.min_standstill_gap_m)?;
        require_positive("reg157.brake_mps2", self.brake_mps2)
    }
}

pub fn reg157_min_gap<T: Scalar>(v_ego_mps: T, p: &Reg157Params<T>) -> T {
    p.min_standstill_gap_m.max(v_ego_mps * p.min_time_gap_s)
}

pub fn reg157_evaluate<T: Scalar>(
    ego: &VehicleState<T>,
    cut: &VehicleState<T>,
    ego_dims: &VehicleDims<T>,
    cut_dims: &VehicleDims<T>,
    p: &Reg157Params<T>,
) -> Decision<T> {
    if gap_lateral(ego, cut, ego_dims, cut_dims) >= T::zero() || cut.pos_long_m < ego.pos_long_m {
        return Decision::safe(Rationale::Safe);
    }
    if gap_longitudinal(ego, cut, ego_dims, cut_dims) < reg157_min_gap(ego.vel_long_mps, p) {
        Decision::unsafe_with(Rationale::LongitudinalFail, p.brake_mps2)
    } else {
        Decision::safe(Rationale::Safe)
    }
}

#[derive(Debug, Clone)]
pub struct Reg157Controller<T> {
    params: Reg157Params<T>,
}

impl<T: Scalar> Reg157Controller<T> {
    pub fn new(params: Reg157Params<T>) -> Self {
        Self { params }
    }
}

impl<T: Scalar> SafetyModel<T> for Reg157Controller<T> {
    fn kind(&self) -> ModelKind {
        ModelKind::Reg157
    }

    fn command(&mut self, ctx: &StepContext<T>) -> Command<T> {
        Command::braking(reg157_evaluate(&ctx.ego, &ctx.other, &ctx.ego_dims, &ctx.other_dims, &self.params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(v: f64, gap: f64, y: f64) -> (VehicleState, VehicleState) {
        (VehicleState::cruising(0.0, 0.0, v), VehicleState::cruising(gap + 5.0, y, v))
    }

    #[test]
    fn threshold_examples() {
        let p: Reg157Params = Reg157Params::default();
        let d: VehicleDims = VehicleDims::default();
        let v = 60.0 / 3.6;
        assert!((reg157_min_gap(v, &p) - 16.6667).abs() < 1e-3);
        let (e, c) = pair(v, 20.0, 0.0);
        assert!(reg157_evaluate(&e, &c, &d, &d, &p).safe);
        let (e, c) = pair(v, 15.0, 0.0);
        let dec = reg157_evaluate(&e, &c, &d, &d, &p);
        assert!(!dec.safe);
        assert_eq!(dec.decel_cmd_mps2, 6.0);

        let (e, c) = pair(0.0, 1.9, 0.0);
        assert!(!reg157_evaluate(&e, &c, &d, &d, &p).safe);

        let (e, c) = pair(30.0, 1.0, 3.75);
        assert!(reg157_evaluate(&e, &c, &d, &d, &p).safe);
    }
}
