//! Closed-loop cut-in simulation, rule-based and baseline safety models,
//! surrogate safety metrics and Gaussian TTC risk.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` and `f32` instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod ingest;
pub mod io;
pub mod kinematics;
pub mod metrics;
pub mod risk;
pub mod safety_models;
pub mod scalar;
mod special;

pub use engine::{
    build_scenario, classify_event, feasibility_bound, run_closed_loop, sweep, EventClass, EventThresholds, ModelSpec,
    run_derived_params, ScenarioKind, ScenarioParams, SimResult, SweepGrid, SweepRecord,
};
pub use error::{Error, Result};
pub use kinematics::{step_vehicle, TraceSample, VehicleDims, VehicleState};
pub use metrics::{compute_features, time_to_collision, ttc_sensitivity, SensitivityResult, SurrogateFeatures};
pub use risk::{fit_gaussian, prob_below_threshold, GaussianRisk};
pub use safety_models::{
    build_model, rba::rba_is_safe, rba::RbaParams, Decision, ModelKind, ModelParams, SafetyModel,
};
pub use scalar::Scalar;

pub type VehicleStateF64 = VehicleState<f64>;
pub type VehicleStateF32 = VehicleState<f32>;
pub type VehicleDimsF64 = VehicleDims<f64>;
pub type VehicleDimsF32 = VehicleDims<f32>;
pub type ScenarioParamsF64 = ScenarioParams<f64>;
pub type ScenarioParamsF32 = ScenarioParams<f32>;
pub type ModelParamsF64 = ModelParams<f64>;
pub type ModelParamsF32 = ModelParams<f32>;
pub type RbaParamsF64 = RbaParams<f64>;
pub type RbaParamsF32 = RbaParams<f32>;
pub type SimResultF64 = SimResult<f64>;
pub type SimResultF32 = SimResult<f32>;
pub type DecisionF64 = Decision<f64>;
pub type DecisionF32 = Decision<f32>;
pub type GaussianRiskF64 = GaussianRisk<f64>;
pub type GaussianRiskF32 = GaussianRisk<f32>;
