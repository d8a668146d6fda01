//! Safety models behind a common per-step decision interface.
//!
//! `rba` is the rule-based check with its velocity adjustment. The others
//! are simplified, parameterized stand-ins for well-known baselines; none of
//! them aims at the fidelity of the reference systems they are named after.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{gap_lateral, gap_longitudinal, VehicleDims, VehicleState};
use crate::metrics::time_to_collision;
use crate::scalar::Scalar;

pub mod cc_human;
pub mod fsm;
pub mod idm;
pub mod rba;
pub mod reg157;
pub mod rss;

pub use cc_human::{cc_human_evaluate, CcHumanController, CcHumanParams, CcTimer};
pub use fsm::{fsm_evaluate, fsm_risk, FsmController, FsmParams};
pub use idm::{idm_acceleration, idm_free_acceleration, IdmController, IdmParams};
pub use rba::{rba_decel, rba_is_safe, rba_velocity_update, RbaController, RbaParams};
pub use reg157::{reg157_evaluate, reg157_min_gap, Reg157Controller, Reg157Params};
pub use rss::{rss_evaluate, rss_min_gap, RssController, RssParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rationale {
    LateralFail,
    LongitudinalFail,
    MarginPass,
    Safe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision<T = f64> {
    pub safe: bool,
    /// Commanded deceleration, m/s^2, always >= 0 and 0 when safe.
    pub decel_cmd_mps2: T,
    pub rationale: Rationale,
    /// Set by the RBA controller after a run of saturated braking steps.
    pub lane_change_advised: bool,
}

impl<T: Scalar> Decision<T> {
    pub fn safe(rationale: Rationale) -> Self {
        Self {
            safe: true,
            decel_cmd_mps2: T::zero(),
            rationale,
            lane_change_advised: false,
        }
    }

    pub fn unsafe_with(rationale: Rationale, decel_cmd_mps2: T) -> Self {
        Self {
            safe: false,
            decel_cmd_mps2,
            rationale,
            lane_change_advised: false,
        }
    }
}

/// How a model drives the ego vehicle for the next step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Actuation<T> {
    /// Longitudinal acceleration held over the step, m/s^2.
    Accel(T),
    /// Velocity at the end of the step, m/s.
    NextVelocity(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command<T> {
    pub decision: Decision<T>,
    pub actuation: Actuation<T>,
}

impl<T: Scalar> Command<T> {
    /// Brakes at the decision's commanded level (or coasts when safe).
    pub fn braking(decision: Decision<T>) -> Self {
        Self {
            actuation: Actuation::Accel(-decision.decel_cmd_mps2),
            decision,
        }
    }
}

/// Everything a model sees at one step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<T> {
    pub t_s: T,
    pub dt_s: T,
    pub ego: VehicleState<T>,
    pub other: VehicleState<T>,
    pub ego_dims: VehicleDims<T>,
    pub other_dims: VehicleDims<T>,
    pub lane_width_m: T,
}

impl<T: Scalar> StepContext<T> {
    pub fn gap_long(&self) -> T {
        gap_longitudinal(&self.ego, &self.other, &self.ego_dims, &self.other_dims)
    }

    pub fn gap_lat(&self) -> T {
        gap_lateral(&self.ego, &self.other, &self.ego_dims, &self.other_dims)
    }

    pub fn other_ahead(&self) -> bool {
        self.other.pos_long_m >= self.ego.pos_long_m
    }

    /// Bodies overlap laterally: the other vehicle is in the ego's path.
    pub fn in_path(&self) -> bool {
        self.gap_lat() < T::zero()
    }

    /// Gap to the other vehicle if it is ahead and not overlapping.
    pub fn gap_ahead(&self) -> Option<T> {
        let gap = self.gap_long();
        (self.other_ahead() && gap >= T::zero()).then_some(gap)
    }

    /// TTC from the ego's perspective; infinite unless the other vehicle is
    /// ahead and being closed on.
    pub fn ttc_ahead(&self) -> T {
        ttc_ahead(&self.ego, &self.other, &self.ego_dims, &self.other_dims)
    }
}

pub(crate) fn ttc_ahead<T: Scalar>(
    ego: &VehicleState<T>,
    other: &VehicleState<T>,
    ego_dims: &VehicleDims<T>,
    other_dims: &VehicleDims<T>,
) -> T {
    let gap = gap_longitudinal(ego, other, ego_dims, other_dims);
    if other.pos_long_m >= ego.pos_long_m && gap >= T::zero() {
        time_to_collision(gap, ego.vel_long_mps - other.vel_long_mps)
    } else {
        T::infinity()
    }
}

pub trait SafetyModel<T: Scalar>: Send {
    fn kind(&self) -> ModelKind;

    fn command(&mut self, ctx: &StepContext<T>) -> Command<T>;
}

/// Registered model names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rba,
    Rss,
    Reg157,
    CcHuman,
    Fsm,
    Idm,
    /// Null controller: never brakes.
    None,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Rba,
        ModelKind::Rss,
        ModelKind::Reg157,
        ModelKind::CcHuman,
        ModelKind::Fsm,
        ModelKind::Idm,
        ModelKind::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rba => "rba",
            ModelKind::Rss => "rss",
            ModelKind::Reg157 => "reg157",
            ModelKind::CcHuman => "cc_human",
            ModelKind::Fsm => "fsm",
            ModelKind::Idm => "idm",
            ModelKind::None => "none",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = ModelKind::ALL.iter().map(|k| k.name()).collect();
                Error::config("models", format!("unknown model \"{s}\" (known: {})", known.join(", ")))
            })
    }
}

/// Parameters for every registered model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ModelParams<T = f64> {
    pub rba: RbaParams<T>,
    pub rss: RssParams<T>,
    pub reg157: Reg157Params<T>,
    pub cc_human: CcHumanParams<T>,
    pub fsm: FsmParams<T>,
    pub idm: IdmParams<T>,
}

impl<T: Scalar> Default for ModelParams<T> {
    fn default() -> Self {
        Self {
            rba: RbaParams::default(),
            rss: RssParams::default(),
            reg157: Reg157Params::default(),
            cc_human: CcHumanParams::default(),
            fsm: FsmParams::default(),
            idm: IdmParams::default(),
        }
    }
}

impl<T: Scalar> ModelParams<T> {
    /// Defaults tied to a run: RBA step frequency `1/dt` and IDM desired
    /// speed equal to the ego's initial speed.
    pub fn for_run(dt_s: T, ego_initial_speed_mps: T) -> Self {
        let mut p = Self::default();
        p.rba.step_freq_hz = dt_s.recip();
        p.idm.desired_speed_mps = ego_initial_speed_mps;
        p
    }

    pub fn validate(&self) -> Result<()> {
        self.rba.validate()?;
        self.rss.validate()?;
        self.reg157.validate()?;
        self.cc_human.validate()?;
        self.fsm.validate()?;
        self.idm.validate()
    }
}

struct NullController;

impl<T: Scalar> SafetyModel<T> for NullController {
    fn kind(&self) -> ModelKind {
        ModelKind::None
    }

    fn command(&mut self, _ctx: &StepContext<T>) -> Command<T> {
        Command::braking(Decision::safe(Rationale::Safe))
    }
}

/// Instantiates a fresh controller; stateful models start from zero state.
pub fn build_model<T: Scalar>(kind: ModelKind, params: &ModelParams<T>) -> Box<dyn SafetyModel<T>> {
    match kind {
        ModelKind::Rba => Box::new(RbaController::new(params.rba)),
        ModelKind::Rss => Box::new(RssController::new(params.rss)),
        ModelKind::Reg157 => Box::new(Reg157Controller::new(params.reg157)),
        ModelKind::CcHuman => Box::new(CcHumanController::new(params.cc_human)),
        ModelKind::Fsm => Box::new(FsmController::new(params.fsm)),
        ModelKind::Idm => Box::new(IdmController::new(params.idm)),
        ModelKind::None => Box::new(NullController),
    }
}

pub(crate) fn require_positive<T: Scalar>(name: &str, value: T) -> Result<()> {
    if value.is_finite() && value > T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be > 0, got {value}")))
    }
}

pub(crate) fn require_non_negative<T: Scalar>(name: &str, value: T) -> Result<()> {
    if value.is_finite() && value >= T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be >= 0, got {value}")))
    }
}
