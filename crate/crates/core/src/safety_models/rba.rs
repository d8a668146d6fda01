//! Rule-based cut-in check and per-step velocity adjustment.
//!
//! The check is a conjunction: lateral clearance must exceed
//! `d_lat_safe_m`, and either the longitudinal gap exceeds the safe
//! distance or the gap-to-closing-speed ratio beats the stopping-time
//! margin. When the check fails the ego velocity is reduced by a per-step
//! decrement driven by the larger of the distance and TTC shortfalls.

use serde::{Deserialize, Serialize};

use super::{
    require_non_negative, require_positive, Actuation, Command, Decision, ModelKind, Rationale,
    SafetyModel, StepContext,
};
use crate::error::{Error, Result};
use crate::kinematics::{gap_lateral, gap_longitudinal, VehicleDims, VehicleState};
use crate::metrics::CLOSING_SPEED_FLOOR_MPS;
use crate::scalar::{clamp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct RbaParams<T = f64> {
    /// Required lateral clearance, m.
    pub d_lat_safe_m: T,
    /// Static safe longitudinal distance, m.
    pub d_safe_m: T,
    /// Maximum deceleration, m/s^2.
    pub a_max_mps2: T,
    pub t_react_s: T,
    /// Velocity floor of the adjustment, m/s.
    pub v_min_mps: T,
    pub ttc_safe_s: T,
    /// Added to `d_safe_m` in the distance shortfall, m.
    pub safety_buffer_m: T,
    /// Frequency dividing the decrement, Hz. One decrement per step.
    pub step_freq_hz: T,
    /// Constant added to the stopping-time margin, s.
    pub time_margin_s: T,
    /// Speed-proportional extension of the safe distance, s.
    pub headway_gain_s: T,
    /// Consecutive saturated braking steps before a lane change is advised.
    pub lane_change_saturation_steps: u32,
}

impl<T: Scalar> Default for RbaParams<T> {
    fn default() -> Self {
        Self {
            d_lat_safe_m: T::lit(0.5),
            d_safe_m: T::lit(10.0),
            a_max_mps2: T::lit(6.0),
            t_react_s: T::lit(0.5),
            v_min_mps: T::zero(),
            ttc_safe_s: T::lit(3.0),
            safety_buffer_m: T::lit(2.0),
            step_freq_hz: T::lit(20.0),
            time_margin_s: T::lit(0.1),
            headway_gain_s: T::zero(),
            lane_change_saturation_steps: 5,
        }
    }
}

impl<T: Scalar> RbaParams<T> {
    pub fn validate(&self) -> Result<()> {
        require_positive("rba.a_max_mps2", self.a_max_mps2)?;
        require_positive("rba.ttc_safe_s", self.ttc_safe_s)?;
        require_positive("rba.step_freq_hz", self.step_freq_hz)?;
        require_non_negative("rba.v_min_mps", self.v_min_mps)?;
        require_non_negative("rba.t_react_s", self.t_react_s)?;
        require_non_negative("rba.headway_gain_s", self.headway_gain_s)?;
        if !(self.d_safe_m + self.safety_buffer_m > T::zero()) {
            return Err(Error::invalid("rba.d_safe_m + rba.safety_buffer_m must be > 0"));
        }
        for (name, v) in [
            ("rba.d_lat_safe_m", self.d_lat_safe_m),
            ("rba.d_safe_m", self.d_safe_m),
            ("rba.safety_buffer_m", self.safety_buffer_m),
            ("rba.time_margin_s", self.time_margin_s),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Evaluates the safety conjunction for the ego and the cutting-in vehicle.
/// The returned decision never carries a deceleration.
pub fn rba_is_safe<T: Scalar>(
    ego: &VehicleState<T>,
    cut: &VehicleState<T>,
    ego_dims: &VehicleDims<T>,
    cut_dims: &VehicleDims<T>,
    p: &RbaParams<T>,
) -> Decision<T> {
    let gap_lat = gap_lateral(ego, cut, ego_dims, cut_dims);
    if !(gap_lat > p.d_lat_safe_m) {
        return Decision::unsafe_with(Rationale::LateralFail, T::zero());
    }

    let gap_long = gap_longitudinal(ego, cut, ego_dims, cut_dims);
    let d_safe_eff = p.d_safe_m + p.headway_gain_s * ego.vel_long_mps;
    if gap_long > d_safe_eff {
        return Decision::safe(Rationale::Safe);
    }

    let delta_v = ego.vel_long_mps - cut.vel_long_mps;
    // Non-closing: the stopping margin holds by definition.
    let margin_ok = if delta_v.abs() < T::lit(CLOSING_SPEED_FLOOR_MPS) || delta_v <= T::zero() {
        true
    } else {
        let margin = delta_v / (T::two() * p.a_max_mps2) + p.t_react_s + p.time_margin_s;
        gap_long / delta_v.abs() > margin
    };

    if margin_ok {
        Decision::safe(Rationale::MarginPass)
    } else {
        Decision::unsafe_with(Rationale::LongitudinalFail, T::zero())
    }
}

/// Per-step velocity decrement (m/s), in `[0, a_max_mps2]`.
///
/// An infinite `ttc_s` makes the TTC shortfall `-inf`, so only the distance
/// shortfall can drive the result.
pub fn rba_decel<T: Scalar>(gap_long_m: T, ttc_s: T, p: &RbaParams<T>) -> T {
    let reach = p.d_safe_m + p.safety_buffer_m;
    let dist_shortfall = (reach - gap_long_m) / reach;
    let ttc_shortfall = (p.ttc_safe_s - ttc_s) / p.ttc_safe_s;
    let raw = dist_shortfall.max(ttc_shortfall) * p.a_max_mps2 / p.step_freq_hz;
    clamp(raw.min(p.a_max_mps2), T::zero(), p.a_max_mps2)
}

pub fn rba_velocity_update<T: Scalar>(v_ego_mps: T, dv_dec: T, p: &RbaParams<T>) -> T {
    (v_ego_mps - dv_dec).max(p.v_min_mps)
}

/// Closed-loop wrapper: check, decrement, and lane-change advisory.
#[derive(Debug, Clone)]
pub struct RbaController<T> {
    params: RbaParams<T>,
    saturated_steps: u32,
}

impl<T: Scalar> RbaController<T> {
    pub fn new(params: RbaParams<T>) -> Self {
        Self {
            params,
            saturated_steps: 0,
        }
    }
}

impl<T: Scalar> SafetyModel<T> for RbaController<T> {
    fn kind(&self) -> ModelKind {
        ModelKind::Rba
    }

    fn command(&mut self, ctx: &StepContext<T>) -> Command<T> {
        let p = &self.params;
        let mut decision = rba_is_safe(&ctx.ego, &ctx.other, &ctx.ego_dims, &ctx.other_dims, p);
        if decision.safe {
            self.saturated_steps = 0;
            return Command::braking(decision);
        }

        // A vehicle behind the ego contributes no longitudinal shortfall.
        let gap = if ctx.other_ahead() {
            ctx.gap_long()
        } else {
            T::infinity()
        };
        let cap = p.a_max_mps2 * ctx.dt_s;
        let dv = rba_decel(gap, ctx.ttc_ahead(), p).min(cap);
        let v_next = rba_velocity_update(ctx.ego.vel_long_mps, dv, p);

        let saturated = dv >= cap;
        self.saturated_steps = if saturated { self.saturated_steps + 1 } else { 0 };
        decision.decel_cmd_mps2 = if saturated { p.a_max_mps2 } else { dv / ctx.dt_s };
        decision.lane_change_advised = self.saturated_steps >= p.lane_change_saturation_steps;

        Command {
            decision,
            actuation: Actuation::NextVelocity(v_next),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Literal transcription of the safety conjunction, kept independent of
    /// the production code path.
    fn oracle(ego: (f64, f64, f64), cut: (f64, f64, f64), w: (f64, f64), l: (f64, f64), p: &RbaParams) -> bool {
        let (xe, ye, ve) = ego;
        let (xc, yc, vc) = cut;
        let lateral = (ye - yc).abs() - (w.0 + w.1) / 2.0 > p.d_lat_safe_m;
        let d_long = (xe - xc).abs() - (l.0 + l.1) / 2.0;
        let dv = ve - vc;
        let ratio = if dv <= 0.0 || dv.abs() < 1e-6 {
            true
        } else {
            d_long / dv.abs() > dv / (2.0 * p.a_max_mps2) + p.t_react_s + 0.1
        };
        lateral && (d_long > p.d_safe_m || ratio)
    }

    fn dims(w: f64, l: f64) -> VehicleDims {
        VehicleDims::new(w, l).unwrap()
    }

    #[test]
    fn large_separation_is_safe() {
        let p: RbaParams = RbaParams::default();
        let d = dims(2.0, 5.0);
        let ego: VehicleState = VehicleState::cruising(0.0, 0.0, 20.0);
        let cut: VehicleState = VehicleState::cruising(200.0, 3.75, 20.0);
        let dec = rba_is_safe(&ego, &cut, &d, &d, &p);
        assert!(dec.safe);
        assert_eq!(dec.rationale, Rationale::Safe);
    }

    #[test]
    fn lateral_overlap_is_unsafe() {
        let p: RbaParams = RbaParams::default();
        let d = dims(2.0, 5.0);
        let ego: VehicleState = VehicleState::cruising(0.0, 0.0, 20.0);
        let cut: VehicleState = VehicleState::cruising(40.0, 0.5, 18.0);
        let dec = rba_is_safe(&ego, &cut, &d, &d, &p);
        assert!(!dec.safe);
        assert_eq!(dec.rationale, Rationale::LateralFail);
        assert_eq!(dec.decel_cmd_mps2, 0.0);
    }

    #[test]
    fn margin_clause_rescues_short_gap() {
        let p: RbaParams = RbaParams::default();
        let d = dims(2.0, 5.0);
        let ego: VehicleState = VehicleState::cruising(0.0, 0.0, 20.0);
        let cut: VehicleState = VehicleState::cruising(13.0, 3.0, 18.0);
        // gap_lat = 1.0, gap_long = 8 <= 10, ratio 4.0 > 2/12 + 0.6
        assert!(oracle((0.0, 0.0, 20.0), (13.0, 3.0, 18.0), (2.0, 2.0), (5.0, 5.0), &p));
        let dec = rba_is_safe(&ego, &cut, &d, &d, &p);
        assert!(dec.safe);
        assert_eq!(dec.rationale, Rationale::MarginPass);
    }

    #[test]
    fn closing_too_fast_fails_longitudinally() {
        let p: RbaParams = RbaParams::default();
        let d = dims(2.0, 5.0);
        let ego: VehicleState = VehicleState::cruising(0.0, 0.0, 30.0);
        let cut: VehicleState = VehicleState::cruising(10.0, 3.75, 10.0);
        let dec = rba_is_safe(&ego, &cut, &d, &d, &p);
        assert_eq!(dec.rationale, Rationale::LongitudinalFail);
    }

    #[test]
    fn headway_gain_extends_safe_distance() {
        let p: RbaParams = RbaParams {
            headway_gain_s: 1.0,
            ..RbaParams::default()
        };
        let d = dims(2.0, 5.0);
        let ego: VehicleState = VehicleState::cruising(0.0, 0.0, 30.0);
        let cut: VehicleState = VehicleState::cruising(25.0, 3.75, 10.0);
        // gap 20 > 10 but < 10 + 30; ratio 1.0 < 20/12 + 0.6 fails
        assert!(rba_is_safe(&ego, &cut, &d, &d, &RbaParams::default()).safe);
        assert!(!rba_is_safe(&ego, &cut, &d, &d, &p).safe);
    }

    #[test]
    fn decel_examples() {
        let p: RbaParams = RbaParams {
            d_safe_m: 10.0,
            safety_buffer_m: 2.0,
            ttc_safe_s: 3.0,
            a_max_mps2: 6.0,
            step_freq_hz: 10.0,
            ..RbaParams::default()
        };
        // max(0.5, 0.5) * 6 / 10
        assert!((rba_decel(6.0, 1.5, &p) - 0.3).abs() < 1e-15);
        assert_eq!(rba_decel(12.0, 3.0, &p), 0.0);
        let p1: RbaParams = RbaParams { step_freq_hz: 1.0, ..p };
        assert_eq!(rba_decel(0.0, 0.0, &p1), 6.0);
        // infinite TTC never dominates
        assert!((rba_decel(6.0, f64::INFINITY, &p) - 0.3).abs() < 1e-15);
        assert_eq!(rba_decel(100.0, f64::INFINITY, &p), 0.0);
        // overlap drives the distance term past 1; output saturates
        assert_eq!(rba_decel(-100.0, f64::INFINITY, &p1), 6.0);
    }

    #[test]
    fn velocity_update_examples() {
        let p: RbaParams = RbaParams::default();
        assert!((rba_velocity_update(20.0, 0.3, &p) - 19.7).abs() < 1e-12);
        assert_eq!(rba_velocity_update(0.2, 6.0, &p), 0.0);
        let p2: RbaParams = RbaParams { v_min_mps: 2.0, ..p };
        assert_eq!(rba_velocity_update(5.0, 0.0, &p2), 5.0);
    }

    #[test]
    fn controller_caps_and_advises_lane_change() {
        let p: RbaParams = RbaParams::default();
        let mut c = RbaController::new(p);
        let ctx = StepContext {
            t_s: 0.0,
            dt_s: 0.05,
            ego: VehicleState::cruising(0.0, 0.0, 30.0),
            other: VehicleState::cruising(4.0, 0.0, 5.0),
            ego_dims: VehicleDims::default(),
            other_dims: VehicleDims::default(),
            lane_width_m: 3.75,
        };
        let mut last = None;
        for _ in 0..5 {
            last = Some(c.command(&ctx));
        }
        let cmd = last.unwrap();
        assert_eq!(cmd.decision.decel_cmd_mps2, 6.0);
        assert!(cmd.decision.lane_change_advised);
        match cmd.actuation {
            Actuation::NextVelocity(v) => assert!((v - (30.0 - 0.3)).abs() < 1e-12),
            Actuation::Accel(_) => panic!("rba actuates by velocity"),
        }
    }

    #[test]
    fn controller_ignores_vehicle_behind() {
        let mut c = RbaController::new(RbaParams::default());
        let ctx = StepContext {
            t_s: 0.0,
            dt_s: 0.05,
            ego: VehicleState::cruising(20.0, 0.0, 20.0),
            other: VehicleState::cruising(12.0, 0.0, 20.0),
            ego_dims: VehicleDims::default(),
            other_dims: VehicleDims::default(),
            lane_width_m: 3.75,
        };
        let cmd = c.command(&ctx);
        assert!(!cmd.decision.safe);
        assert_eq!(cmd.decision.decel_cmd_mps2, 0.0);
    }

    #[test]
    fn generic_over_f32() {
        let p = RbaParams::<f32>::default();
        let d = VehicleDims::<f32>::default();
        let ego = VehicleState::<f32>::cruising(0.0, 0.0, 20.0);
        let cut = VehicleState::<f32>::cruising(13.0, 3.0, 18.0);
        assert!(rba_is_safe(&ego, &cut, &d, &d, &p).safe);
        assert!(rba_decel(0.0f32, 0.0, &p) > 0.0);
    }

    proptest! {
        #[test]
        fn matches_oracle(
            xc in -10.0..210.0f64, yc in -6.0..6.0f64,
            ve in 0.0..40.0f64, vc in 0.0..40.0f64,
            we in 1.5..2.5f64, wc in 1.5..2.5f64, le in 3.0..12.0f64, lc in 3.0..12.0f64,
        ) {
            let p: RbaParams = RbaParams::default();
            let ego: VehicleState = VehicleState::cruising(0.0, 0.0, ve);
            let cut: VehicleState = VehicleState::cruising(xc, yc, vc);
            let got = rba_is_safe(&ego, &cut, &dims(we, le), &dims(wc, lc), &p).safe;
            prop_assert_eq!(got, oracle((0.0, 0.0, ve), (xc, yc, vc), (we, wc), (le, lc), &p));
        }

        #[test]
        fn decel_contract(gap in -50.0..300.0f64, ttc in 0.0..20.0f64, f in 1.0..100.0f64) {
            let p: RbaParams = RbaParams { step_freq_hz: f, ..RbaParams::default() };
            let dv = rba_decel(gap, ttc, &p);
            prop_assert!((0.0..=p.a_max_mps2).contains(&dv));
            if gap >= p.d_safe_m + p.safety_buffer_m && ttc >= p.ttc_safe_s {
                prop_assert_eq!(dv, 0.0);
            }
        }
    }
}
