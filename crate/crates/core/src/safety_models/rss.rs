//! Longitudinal RSS-style safe distance.

use serde::{Deserialize, Serialize};

use super::{require_non_negative, require_positive, Command, Decision, ModelKind, Rationale, SafetyModel, StepContext};
use crate::error::Result;
use crate::kinematics::{gap_lateral, gap_longitudinal, VehicleDims, VehicleState};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct RssParams<T = f64> {
    /// Response time rho, s.
    pub response_time_s: T,
    /// Worst-case ego acceleration during the response time, m/s^2.
    pub accel_during_response_mps2: T,
    /// Minimum braking the ego guarantees, m/s^2.
    pub ego_min_brake_mps2: T,
    /// Maximum braking the other vehicle may apply, m/s^2.
    pub other_max_brake_mps2: T,
}

impl<T: Scalar> Default for RssParams<T> {
    fn default() -> Self {
        Self {
            response_time_s: T::lit(0.75),
            accel_during_response_mps2: T::lit(2.0),
            ego_min_brake_mps2: T::lit(4.0),
            other_max_brake_mps2: T::lit(6.0),
        }
    }
}

impl<T: Scalar> RssParams<T> {
    pub fn validate(&self) -> Result<()> {
        require_positive("rss.response_time_s", self.response_time_s)?;
        require_non_negative("rss.accel_during_response_mps2", self.accel_during_response_mps2)?;
        require_positive("rss.ego_min_brake_mps2", self.ego_min_brake_mps2)?;
        require_positive("rss.other_max_brake_mps2", self.other_max_brake_mps2)
    }
}

/// Minimum safe longitudinal gap, clamped at zero.
pub fn rss_min_gap<T: Scalar>(v_ego_mps: T, v_cut_mps: T, p: &RssParams<T>) -> T {
    let rho = p.response_time_s;
    let a = p.accel_during_response_mps2;
    let v_after = v_ego_mps + rho * a;
    let d = v_ego_mps * rho + T::half() * a * rho * rho + v_after * v_after / (T::two() * p.ego_min_brake_mps2)
        - v_cut_mps * v_cut_mps / (T::two() * p.other_max_brake_mps2);
    d.max(T::zero())
}

/// Unsafe when the other vehicle is ahead, laterally overlapping and
/// closer than the minimum gap; braking is then at `ego_min_brake_mps2`.
pub fn rss_evaluate<T: Scalar>(
    ego: &VehicleState<T>,
    cut: &VehicleState<T>,
    ego_dims: &VehicleDims<T>,
    cut_dims: &VehicleDims<T>,
    p: &RssParams<T>,
) -> Decision<T> {
    if gap_lateral(ego, cut, ego_dims, cut_dims) >= T::zero() {
        return Decision::safe(Rationale::Safe);
    }
    let ahead = cut.pos_long_m >= ego.pos_long_m;
    let gap = gap_longitudinal(ego, cut, ego_dims, cut_dims);
    if ahead && gap < rss_min_gap(ego.vel_long_mps, cut.vel_long_mps, p) {
        Decision::unsafe_with(Rationale::LongitudinalFail, p.ego_min_brake_mps2)
    } else {
        Decision::safe(Rationale::Safe)
    }
}

#[derive(Debug, Clone)]
pub struct RssController<T> {
    params: RssParams<T>,
}

impl<T: Scalar> RssController<T> {
    pub fn new(params: RssParams<T>) -> Self {
        Self { params }
    }
}

impl<T: Scalar> SafetyModel<T> for RssController<T> {
    fn kind(&self) -> ModelKind {
        ModelKind::Rss
    }

    fn command(&mut self, ctx: &StepContext<T>) -> Command<T> {
        Command::braking(rss_evaluate(&ctx.ego, &ctx.other, &ctx.ego_dims, &ctx.other_dims, &self.params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn min_gap_hand_evaluation() {
        let p: RssParams = RssParams::default();
        let expected = 20.0 * 0.75 + 0.5 * 2.0 * 0.75 * 0.75 + 21.5 * 21.5 / 8.0 - 400.0 / 12.0;
        let d = rss_min_gap(20.0, 20.0, &p);
        assert!((d - expected).abs() < 1e-12);
        assert!((d - 40.0104).abs() < 1e-3);

        let dims: VehicleDims = VehicleDims::default();
        let ego: VehicleState = VehicleState::cruising(0.0, 0.0, 20.0);
        let cut: VehicleState = VehicleState::cruising(65.0, 0.5, 20.0); // gap 60
        assert!(rss_evaluate(&ego, &cut, &dims, &dims, &p).safe);
        let close: VehicleState = VehicleState::cruising(40.0, 0.5, 20.0); // gap 35
        let dec = rss_evaluate(&ego, &close, &dims, &dims, &p);
        assert!(!dec.safe);
        assert_eq!(dec.decel_cmd_mps2, 4.0);
    }

    #[test]
    fn standstill_and_lateral_gate() {
        let p: RssParams = RssParams::default();
        assert_eq!(rss_min_gap(0.0, 0.0, &p), 0.5 * 2.0 * 0.75 * 0.75 + 1.5 * 1.5 / 8.0);
        // A stopped pair: the response-time term alone; any gap beyond it is safe.
        let dims: VehicleDims = VehicleDims::default();
        let ego: VehicleState = VehicleState::cruising(0.0, 0.0, 0.0);
        let cut: VehicleState = VehicleState::cruising(6.0, 0.0, 0.0);
        assert!(rss_evaluate(&ego, &cut, &dims, &dims, &p).safe);
        let zero_acc: RssParams = RssParams {
            accel_during_response_mps2: 0.0,
            ..p
        };
        assert_eq!(rss_min_gap(0.0, 0.0, &zero_acc), 0.0);

        let far_lane: VehicleState = VehicleState::cruising(6.0, 3.75, 0.0);
        let fast: VehicleState = VehicleState::cruising(0.0, 0.0, 40.0);
        assert!(rss_evaluate(&fast, &far_lane, &dims, &dims, &p).safe);
    }

    proptest! {
        #[test]
        fn monotone_in_speeds(ve in 0.0..50.0f64, vc in 0.0..50.0f64, d in 0.0..10.0f64) {
            let p: RssParams = RssParams::default();
            prop_assert!(rss_min_gap(ve + d, vc, &p) >= rss_min_gap(ve, vc, &p));
            prop_assert!(rss_min_gap(ve, vc + d, &p) <= rss_min_gap(ve, vc, &p));
        }
    }
}
