//! Careful human driver: perceives a cut-in from lateral intrusion plus a
//! short TTC, then brakes after a fixed reaction delay.

use serde::{Deserialize, Serialize};

use super::{
    require_positive, ttc_ahead, Command, Decision, ModelKind, Rationale, SafetyModel, StepContext,
};
use crate::error::{Error, Result};
use crate::kinematics::{VehicleDims, VehicleState};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct CcHumanParams<T = f64> {
    /// Intrusion of the other vehicle's near side past the ego lane edge, m.
    pub lateral_intrusion_trigger_m: T,
    pub perception_ttc_s: T,
    pub reaction_delay_s: T,
    pub brake_mps2: T,
}

impl<T: Scalar> Default for CcHumanParams<T> {
    fn default() -> Self {
        Self {
            lateral_intrusion_trigger_m: T::lit(0.375),
            perception_ttc_s: T::lit(2.0),
            reaction_delay_s: T::lit(0.75),
            brake_mps2: T::lit(0.774 * 9.81),
        }
    }
}

impl<T: Scalar> CcHumanParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.lateral_intrusion_trigger_m.is_finite() {
            return Err(Error::invalid("cc_human.lateral_intrusion_trigger_m must be finite"));
        }
        require_positive("cc_human.perception_ttc_s", self.perception_ttc_s)?;
        require_positive("cc_human.reaction_delay_s", self.reaction_delay_s)?;
        require_positive("cc_human.brake_mps2", self.brake_mps2)
    }
}

/// Time since the risk was first perceived; `None` while nothing is
/// perceived. One timer per scenario run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CcTimer<T> {
    pub since_perception_s: Option<T>,
}

/// How far the other vehicle's near side reaches past the ego lane edge.
pub fn lateral_intrusion<T: Scalar>(
    ego: &VehicleState<T>,
    other: &VehicleState<T>,
    other_dims: &VehicleDims<T>,
    lane_width_m: T,
) -> T {
    let near_side = (other.pos_lat_m - ego.pos_lat_m).abs() - other_dims.width_m / T::two();
    lane_width_m / T::two() - near_side
}

/// One step of the perception/reaction state machine.
///
/// A step with a stimulus and no running timer starts it at zero; later
/// stimulus steps add `dt_s`. Braking starts once the elapsed time reaches
/// the reaction delay. Losing the stimulus resets the timer.
#[allow(clippy::too_many_arguments)]
pub fn cc_human_evaluate<T: Scalar>(
    ego: &VehicleState<T>,
    cut: &VehicleState<T>,
    ego_dims: &VehicleDims<T>,
    cut_dims: &VehicleDims<T>,
    p: &CcHumanParams<T>,
    lane_width_m: T,
    timer: CcTimer<T>,
    dt_s: T,
) -> (Decision<T>, CcTimer<T>) {
    let intruding = lateral_intrusion(ego, cut, cut_dims, lane_width_m) > p.lateral_intrusion_trigger_m;
    let urgent = ttc_ahead(ego, cut, ego_dims, cut_dims) < p.perception_ttc_s;
    if !(intruding && urgent) {
        return (Decision::safe(Rationale::Safe), CcTimer::default());
    }
    let elapsed = timer.since_perception_s.map_or(T::zero(), |e| e + dt_s);
    let decel = if elapsed >= p.reaction_delay_s {
        p.brake_mps2
    } else {
        T::zero()
    };
    (
        Decision::unsafe_with(Rationale::LongitudinalFail, decel),
        CcTimer {
            since_perception_s: Some(elapsed),
        },
    )
}

#[derive(Debug, Clone)]
pub struct CcHumanController<T> {
    params: CcHumanParams<T>,
    timer: CcTimer<T>,
}

impl<T: Scalar> CcHumanController<T> {
    pub fn new(params: CcHumanParams<T>) -> Self {
        Self {
            params,
            timer: CcTimer::default(),
        }
    }
}

impl<T: Scalar> SafetyModel<T> for CcHumanController<T> {
    fn kind(&self) -> ModelKind {
        ModelKind::CcHuman
    }

    fn command(&mut self, ctx: &StepContext<T>) -> Command<T> {
        let (decision, timer) = cc_human_evaluate(
            &ctx.ego,
            &ctx.other,
            &ctx.ego_dims,
            &ctx.other_dims,
            &self.params,
            ctx.lane_width_m,
            self.timer,
            ctx.dt_s,
        );
        self.timer = timer;
        Command::braking(decision)
    }
}
