//! Two-indicator surrogate risk: proximity and urgency, combined by max.

use serde::{Deserialize, Serialize};

use super::{require_positive, ttc_ahead, Command, Decision, ModelKind, Rationale, SafetyModel, StepContext};
use crate::error::Result;
use crate::kinematics::{gap_lateral, gap_longitudinal, VehicleDims, VehicleState};
use crate::scalar::{clamp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct FsmParams<T = f64> {
    /// Gap at which proximity risk starts, m.
    pub proximity_scale_m: T,
    /// TTC at which urgency risk starts, s.
    pub ttc_scale_s: T,
    pub braking_gain: T,
    pub a_max_mps2: T,
}

impl<T: Scalar> Default for FsmParams<T> {
    fn default() -> Self {
        Self {
            proximity_scale_m: T::lit(30.0),
            ttc_scale_s: T::lit(4.0),
            braking_gain: T::one(),
            a_max_mps2: T::lit(6.0),
        }
    }
}

impl<T: Scalar> FsmParams<T> {
    pub fn validate(&self) -> Result<()> {
        require_positive("fsm.proximity_scale_m", self.proximity_scale_m)?;
        require_positive("fsm.ttc_scale_s", self.ttc_scale_s)?;
        require_positive("fsm.braking_gain", self.braking_gain)?;
        require_positive("fsm.a_max_mps2", self.a_max_mps2)
    }
}

/// Risk in `[0, 1]`.
pub fn fsm_risk<T: Scalar>(gap_long_m: T, ttc_s: T, p: &FsmParams<T>) -> T {
    let proximity = clamp((p.proximity_scale_m - gap_long_m) / p.proximity_scale_m, T::zero(), T::one());
    let urgency = if ttc_s.is_finite() {
        clamp((p.ttc_scale_s - ttc_s) / p.ttc_scale_s, T::zero(), T::one())
    } else {
        T::zero()
    };
    proximity.max(urgency)
}

pub fn fsm_evaluate<T: Scalar>(
    ego: &VehicleState<T>,
    cut: &VehicleState<T>,
    ego_dims: &VehicleDims<T>,
    cut_dims: &VehicleDims<T>,
    p: &FsmParams<T>,
) -> Decision<T> {
    if gap_lateral(ego, cut, ego_dims, cut_dims) >= T::zero() || cut.pos_long_m < ego.pos_long_m {
        return Decision::safe(Rationale::Safe);
    }
    let gap = gap_longitudinal(ego, cut, ego_dims, cut_dims);
    let risk = fsm_risk(gap, ttc_ahead(ego, cut, ego_dims, cut_dims), p);
    if risk > T::zero() {
        Decision::unsafe_with(Rationale::LongitudinalFail, risk * p.braking_gain * p.a_max_mps2)
    } else {
        Decision::safe(Rationale::Safe)
    }
}

#[derive(Debug, Clone)]
pub struct FsmController<T> {
    params: FsmParams<T>,
}

impl<T: Scalar> FsmController<T> {
    pub fn new(params: FsmParams<T>) -> Self {
        Self { params }
    }
}

impl<T: Scalar> SafetyModel<T> for FsmController<T> {
    fn kind(&self) -> ModelKind {
        ModelKind::Fsm
    }

    fn command(&mut self, ctx: &StepContext<T>) -> Command<T> {
        Command::braking(fsm_evaluate(&ctx.ego, &ctx.other, &ctx.ego_dims, &ctx.other_dims, &self.params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn risk_examples() {
        let p: FsmParams = FsmParams::default();
        assert_eq!(fsm_risk(30.0, 4.0, &p), 0.0);
        assert_eq!(fsm_risk(100.0, f64::INFINITY, &p), 0.0);
        assert_eq!(fsm_risk(15.0, 4.0, &p), 0.5);
        assert_eq!(fsm_risk(0.0, f64::INFINITY, &p), 1.0);
    }

    #[test]
    fn decel_follows_risk() {
        let p: FsmParams = FsmParams {
            braking_gain: 0.8,
            ..FsmParams::default()
        };
        let d: VehicleDims = VehicleDims::default();
        let ego: VehicleState = VehicleState::cruising(0.0, 0.0, 10.0);
        // gap 15 = D_ref / 2, equal speeds -> risk 0.5
        let cut: VehicleState = VehicleState::cruising(20.0, 0.0, 10.0);
        let dec = fsm_evaluate(&ego, &cut, &d, &d, &p);
        assert!(!dec.safe);
        assert!((dec.decel_cmd_mps2 - 0.5 * 0.8 * 6.0).abs() < 1e-12);
        // gap 0 -> saturates
        let touching: VehicleState = VehicleState::cruising(5.0, 0.0, 10.0);
        assert!((fsm_evaluate(&ego, &touching, &d, &d, &p).decel_cmd_mps2 - 0.8 * 6.0).abs() < 1e-12);
        // other lane -> safe
        let side: VehicleState = VehicleState::cruising(20.0, 3.75, 10.0);
        assert!(fsm_evaluate(&ego, &side, &d, &d, &p).safe);
    }

    proptest! {
        #[test]
        fn risk_bounded(gap in -20.0..200.0f64, ttc in 0.0..50.0f64) {
            let r = fsm_risk(gap, ttc, &FsmParams::default());
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
