//! Scenario generation, closed-loop simulation, parameter sweeps and event
//! classification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{
    gap_lateral, gap_longitudinal, overlaps, step_vehicle, TraceSample, VehicleDims, VehicleState,
    DEFAULT_LANE_WIDTH_M,
};
use crate::safety_models::{build_model, Actuation, ModelKind, ModelParams, StepContext};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    CutIn,
    CutOut,
    CarFollowing,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::CutIn => "cut_in",
            ScenarioKind::CutOut => "cut_out",
            ScenarioKind::CarFollowing => "car_following",
        }
    }
}

/// Piece of a car-following lead profile: from `from_s` on, the leader
/// drives at `speed_mps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedSegment<T = f64> {
    pub from_s: T,
    pub speed_mps: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ScenarioParams<T = f64> {
    pub kind: ScenarioKind,
    /// Ego initial speed, m/s.
    pub v_e0: T,
    /// Other vehicle initial speed, m/s.
    pub v_o0: T,
    /// Initial bumper-to-bumper longitudinal gap, m.
    pub d_x0: T,
    /// Initial lateral offset between vehicle centers, m (positive = left).
    pub d_y0: T,
    pub lc_start_s: T,
    pub lc_duration_s: T,
    pub duration_s: T,
    pub dt_s: T,
    pub ego_dims: VehicleDims<T>,
    pub other_dims: VehicleDims<T>,
    pub lane_width_m: T,
    /// Car-following only; before the first segment the leader holds `v_o0`.
    pub lead_speed_profile: Vec<SpeedSegment<T>>,
}

impl<T: Scalar> Default for ScenarioParams<T> {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::CutIn,
            v_e0: T::lit(20.0),
            v_o0: T::lit(20.0),
            d_x0: T::lit(60.0),
            d_y0: T::lit(DEFAULT_LANE_WIDTH_M),
            lc_start_s: T::zero(),
            lc_duration_s: T::lit(2.0),
            duration_s: T::lit(12.0),
            dt_s: T::lit(0.05),
            ego_dims: VehicleDims::default(),
            other_dims: VehicleDims::default(),
            lane_width_m: T::lit(DEFAULT_LANE_WIDTH_M),
            lead_speed_profile: Vec::new(),
        }
    }
}

impl<T: Scalar> ScenarioParams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::config(format!("scenario.{key}"), msg));
        for (key, v) in [
            ("v_e0", self.v_e0),
            ("v_o0", self.v_o0),
            ("d_x0", self.d_x0),
            ("d_y0", self.d_y0),
            ("lc_start_s", self.lc_start_s),
            ("lc_duration_s", self.lc_duration_s),
            ("duration_s", self.duration_s),
            ("dt_s", self.dt_s),
            ("lane_width_m", self.lane_width_m),
        ] {
            if !v.is_finite() {
                return bad(key, format!("must be finite, got {v}"));
            }
        }
        if self.v_e0 < T::zero() {
            return bad("v_e0", format!("must be >= 0, got {}", self.v_e0));
        }
        if self.v_o0 < T::zero() {
            return bad("v_o0", format!("must be >= 0, got {}", self.v_o0));
        }
        if !(self.d_x0 > T::zero()) {
            return bad("d_x0", format!("must be > 0, got {}", self.d_x0));
        }
        if !(self.dt_s > T::zero()) {
            return bad("dt_s", format!("must be > 0, got {}", self.dt_s));
        }
        if !(self.lc_duration_s > T::zero()) {
            return bad("lc_duration_s", format!("must be > 0, got {}", self.lc_duration_s));
        }
        if self.lc_start_s < T::zero() {
            return bad("lc_start_s", format!("must be >= 0, got {}", self.lc_start_s));
        }
        if self.duration_s < self.lc_start_s + self.lc_duration_s {
            return bad(
                "duration_s",
                format!("must be >= lc_start_s + lc_duration_s, got {}", self.duration_s),
            );
        }
        if !(self.lane_width_m > T::zero()) {
            return bad("lane_width_m", "must be > 0".into());
        }
        self.ego_dims
            .validate()
            .map_err(|e| Error::config("scenario.ego_dims", e.to_string()))?;
        self.other_dims
            .validate()
            .map_err(|e| Error::config("scenario.other_dims", e.to_string()))?;
        let mut prev = T::neg_infinity();
        for seg in &self.lead_speed_profile {
            if !(seg.from_s.is_finite() && seg.from_s >= prev) {
                return bad("lead_speed_profile", "segment start times must be finite and nondecreasing".into());
            }
            if !(seg.speed_mps.is_finite() && seg.speed_mps >= T::zero()) {
                return bad("lead_speed_profile", format!("speeds must be >= 0, got {}", seg.speed_mps));
            }
            prev = seg.from_s;
        }
        Ok(())
    }

    /// Number of integration steps; the trace holds at most `steps + 1` samples.
    pub fn steps(&self) -> usize {
        (self.duration_s / self.dt_s).round().to_usize().unwrap_or(0)
    }
}

/// `3s^2 - 2s^3` on `[0, 1]`, clamped outside.
pub fn smoothstep<T: Scalar>(s: T) -> T {
    let s = crate::scalar::clamp(s, T::zero(), T::one());
    s * s * (T::lit(3.0) - T::two() * s)
}

fn smoothstep_rate<T: Scalar>(s: T) -> T {
    if s <= T::zero() || s >= T::one() {
        T::zero()
    } else {
        T::lit(6.0) * s * (T::one() - s)
    }
}

/// Initial states and the open-loop motion plan of the other vehicle.
#[derive(Debug, Clone)]
pub struct Scenario<T = f64> {
    pub params: ScenarioParams<T>,
    pub ego0: VehicleState<T>,
    pub other0: VehicleState<T>,
}

/// Validates the parameters and places both vehicles. The ego starts at the
/// origin in lane 0; the other vehicle starts `d_x0` (bumper to bumper)
/// ahead.
pub fn build_scenario<T: Scalar>(params: &ScenarioParams<T>) -> Result<Scenario<T>> {
    params.validate()?;
    let ego0 = VehicleState::cruising(T::zero(), T::zero(), params.v_e0);
    let x0 = params.d_x0 + (params.ego_dims.length_m + params.other_dims.length_m) / T::two();
    let mut scenario = Scenario {
        params: params.clone(),
        ego0,
        other0: VehicleState::cruising(x0, T::zero(), params.v_o0),
    };
    scenario.other0 = scenario.other_at(T::zero());
    Ok(scenario)
}

impl<T: Scalar> Scenario<T> {
    /// Lateral offset and lateral velocity of the other vehicle at `t_s`.
    pub fn lateral_at(&self, t_s: T) -> (T, T) {
        let p = &self.params;
        let tau = (t_s - p.lc_start_s) / p.lc_duration_s;
        let s = smoothstep(tau);
        let rate = smoothstep_rate(tau) / p.lc_duration_s;
        match p.kind {
            ScenarioKind::CutIn => (p.d_y0 * (T::one() - s), -p.d_y0 * rate),
            ScenarioKind::CutOut => (p.d_y0 * s, p.d_y0 * rate),
            ScenarioKind::CarFollowing => (T::zero(), T::zero()),
        }
    }

    /// Longitudinal offset travelled and speed of the other vehicle at `t_s`.
    fn longitudinal_at(&self, t_s: T) -> (T, T) {
        let p = &self.params;
        if p.kind != ScenarioKind::CarFollowing || p.lead_speed_profile.is_empty() {
            return (p.v_o0 * t_s, p.v_o0);
        }
        let (mut x, mut t, mut v) = (T::zero(), T::zero(), p.v_o0);
        for seg in &p.lead_speed_profile {
            if seg.from_s >= t_s {
                break;
            }
            if seg.from_s > t {
                x = x + v * (seg.from_s - t);
                t = seg.from_s;
            }
            v = seg.speed_mps;
        }
        (x + v * (t_s - t), v)
    }

    pub fn other_at(&self, t_s: T) -> VehicleState<T> {
        let x0 = self.params.d_x0 + (self.params.ego_dims.length_m + self.params.other_dims.length_m) / T::two();
        let (dx, v) = self.longitudinal_at(t_s);
        let (y, vy) = self.lateral_at(t_s);
        VehicleState::new(x0 + dx, y, v, vy)
    }
}

/// Thresholds separating critical from non-critical events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct EventThresholds<T = f64> {
    pub ttc_critical_s: T,
    pub comfort_decel_mps2: T,
}

impl<T: Scalar> Default for EventThresholds<T> {
    fn default() -> Self {
        Self {
            ttc_critical_s: T::lit(2.0),
            comfort_decel_mps2: T::lit(3.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventClass {
    Critical,
    NonCritical,
}

impl EventClass {
    pub fn name(self) -> &'static str {
        match self {
            EventClass::Critical => "critical",
            EventClass::NonCritical => "non_critical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult<T = f64> {
    pub model: ModelKind,
    pub trace: Vec<TraceSample<T>>,
    pub collided: bool,
    pub collision_time_s: Option<T>,
    /// Minimum longitudinal gap over samples where the vehicles overlap
    /// laterally; infinite if they never do.
    pub min_gap_long_m: T,
    /// Minimum of the trace TTC column.
    pub min_ttc_s: T,
    pub peak_decel_mps2: T,
    pub lane_change_advised: bool,
    pub classification: EventClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ModelSpec<T = f64> {
    pub kind: ModelKind,
    pub params: ModelParams<T>,
}

impl<T: Scalar> ModelSpec<T> {
    /// Model with run-derived defaults for `scenario`.
    pub fn for_scenario(kind: ModelKind, scenario: &ScenarioParams<T>) -> Self {
        Self {
            kind,
            params: ModelParams::for_run(scenario.dt_s, scenario.v_e0),
        }
    }
}

fn advance<T: Scalar>(ego: &VehicleState<T>, actuation: Actuation<T>, dt_s: T) -> Result<VehicleState<T>> {
    match actuation {
        Actuation::Accel(a) => step_vehicle(ego, a, T::zero(), dt_s),
        Actuation::NextVelocity(v) => {
            let a = (v - ego.vel_long_mps) / dt_s;
            let mut next = step_vehicle(ego, a, T::zero(), dt_s)?;
            next.vel_long_mps = v;
            Ok(next)
        }
    }
}

/// Simulates one scenario with one model.
///
/// Every step: measure gaps and TTC, query the model, record the sample,
/// then advance both vehicles. Stepping stops at the first sample where the
/// footprints overlap; that sample is the last one in the trace.
///
/// The trace TTC is the ego-perspective TTC to the other vehicle while the
/// two overlap laterally, and infinite otherwise.
pub fn run_closed_loop<T: Scalar>(
    params: &ScenarioParams<T>,
    model: &ModelSpec<T>,
    thresholds: &EventThresholds<T>,
) -> Result<SimResult<T>> {
    let scenario = build_scenario(params)?;
    model.params.validate()?;
    let mut controller = build_model(model.kind, &model.params);
    let p = &scenario.params;

    let n_steps = p.steps();
    let mut trace = Vec::with_capacity(n_steps + 1);
    let mut ego = scenario.ego0;
    let mut collision_time_s = None;
    let mut lane_change_advised = false;

    for k in 0..=n_steps {
        let t_s = p.dt_s * T::from_usize(k).expect("step index fits scalar");
        let other = scenario.other_at(t_s);
        let ctx = StepContext {
            t_s,
            dt_s: p.dt_s,
            ego,
            other,
            ego_dims: p.ego_dims,
            other_dims: p.other_dims,
            lane_width_m: p.lane_width_m,
        };
        let gap_long_m = gap_longitudinal(&ego, &other, &p.ego_dims, &p.other_dims);
        let gap_lat_m = gap_lateral(&ego, &other, &p.ego_dims, &p.other_dims);
        let ttc_s = if gap_lat_m < T::zero() {
            ctx.ttc_ahead()
        } else {
            T::infinity()
        };
        let cmd = controller.command(&ctx);
        lane_change_advised |= cmd.decision.lane_change_advised;
        trace.push(TraceSample {
            t_s,
            ego,
            other,
            gap_long_m,
            gap_lat_m,
            ttc_s,
            safe: cmd.decision.safe,
            decel_cmd_mps2: cmd.decision.decel_cmd_mps2,
        });
        if overlaps(&ego, &other, &p.ego_dims, &p.other_dims) {
            collision_time_s = Some(t_s);
            break;
        }
        if k == n_steps {
            break;
        }
        ego = advance(&ego, cmd.actuation, p.dt_s)?;
    }

    let min_gap_long_m = trace
        .iter()
        .filter(|s| s.gap_lat_m < T::zero())
        .map(|s| s.gap_long_m)
        .fold(T::infinity(), T::min);
    let min_ttc_s = trace.iter().map(|s| s.ttc_s).fold(T::infinity(), T::min);
    let peak_decel_mps2 = trace.iter().map(|s| s.decel_cmd_mps2).fold(T::zero(), T::max);

    let mut result = SimResult {
        model: model.kind,
        trace,
        collided: collision_time_s.is_some(),
        collision_time_s,
        min_gap_long_m,
        min_ttc_s,
        peak_decel_mps2,
        lane_change_advised,
        classification: EventClass::NonCritical,
    };
    result.classification = classify_event(&result, thresholds);
    Ok(result)
}

pub fn classify_event<T: Scalar>(result: &SimResult<T>, thresholds: &EventThresholds<T>) -> EventClass {
    if result.collided
        || result.min_ttc_s < thresholds.ttc_critical_s
        || result.peak_decel_mps2 > thresholds.comfort_decel_mps2
    {
        EventClass::Critical
    } else {
        EventClass::NonCritical
    }
}

/// Smallest initial gap from which braking at `a_max` after `t_react`
/// avoids reaching a leader holding constant speed.
pub fn feasibility_bound<T: Scalar>(v_e0: T, v_o0: T, a_max: T, t_react: T) -> T {
    let dv = (v_e0 - v_o0).max(T::zero());
    dv * t_react + dv * dv / (T::two() * a_max)
}

/// Value ranges of a parameter sweep; unset axes keep the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SweepGrid<T = f64> {
    pub base: ScenarioParams<T>,
    pub v_e0: Vec<T>,
    pub v_o0: Vec<T>,
    pub d_x0: Vec<T>,
    pub d_y0: Vec<T>,
}

impl<T: Scalar> Default for SweepGrid<T> {
    fn default() -> Self {
        Self {
            base: ScenarioParams::default(),
            v_e0: Vec::new(),
            v_o0: Vec::new(),
            d_x0: Vec::new(),
            d_y0: Vec::new(),
        }
    }
}

impl<T: Scalar> SweepGrid<T> {
    fn axis(values: &[T], base: T) -> Vec<T> {
        if values.is_empty() {
            vec![base]
        } else {
            values.to_vec()
        }
    }

    /// Cartesian product, `v_e0` outermost and `d_y0` innermost.
    pub fn points(&self) -> Vec<ScenarioParams<T>> {
        let b = &self.base;
        let mut out = Vec::new();
        for &v_e0 in &Self::axis(&self.v_e0, b.v_e0) {
            for &v_o0 in &Self::axis(&self.v_o0, b.v_o0) {
                for &d_x0 in &Self::axis(&self.d_x0, b.d_x0) {
                    for &d_y0 in &Self::axis(&self.d_y0, b.d_y0) {
                        out.push(ScenarioParams {
                            v_e0,
                            v_o0,
                            d_x0,
                            d_y0,
                            ..b.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord<T = f64> {
    pub model: ModelKind,
    pub grid_index: usize,
    pub scenario: ScenarioParams<T>,
    pub outcome: std::result::Result<SimResult<T>, String>,
}

/// Model parameters for one grid point.
pub type ParamsFor<'a, T> = dyn Fn(ModelKind, &ScenarioParams<T>) -> Result<ModelParams<T>> + Sync + 'a;

/// Defaults derived from the scenario alone; see [`ModelParams::for_run`].
pub fn run_derived_params<T: Scalar>(_kind: ModelKind, scenario: &ScenarioParams<T>) -> Result<ModelParams<T>> {
    Ok(ModelParams::for_run(scenario.dt_s, scenario.v_e0))
}

/// Runs every grid point with every model. Results are ordered by model
/// (in the given order) then grid index, independent of scheduling. A
/// point that fails records its error instead of aborting the sweep.
/// `jobs = None` uses the global rayon pool.
pub fn sweep<T: Scalar>(
    grid: &SweepGrid<T>,
    models: &[ModelKind],
    params_for: &ParamsFor<'_, T>,
    thresholds: &EventThresholds<T>,
    jobs: Option<usize>,
) -> Result<Vec<SweepRecord<T>>> {
    let points = grid.points();
    if models.is_empty() {
        return Err(Error::config("models", "at least one model is required"));
    }
    let tasks: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|m| (0..points.len()).map(move |i| (m, i)))
        .collect();
    let run = || {
        tasks
            .par_iter()
            .map(|&(m, i)| {
                let kind = models[m];
                let outcome = params_for(kind, &points[i])
                    .and_then(|params| run_closed_loop(&points[i], &ModelSpec { kind, params }, thresholds))
                    .map_err(|e| e.to_string());
                SweepRecord {
                    model: kind,
                    grid_index: i,
                    scenario: points[i].clone(),
                    outcome,
                }
            })
            .collect::<Vec<_>>()
    };
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::config("jobs", e.to_string()))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cut_in(v_e0: f64, v_o0: f64, d_x0: f64) -> ScenarioParams {
        ScenarioParams {
            v_e0,
            v_o0,
            d_x0,
            ..ScenarioParams::default()
        }
    }

    fn run(p: &ScenarioParams, kind: ModelKind) -> SimResult {
        run_closed_loop(p, &ModelSpec::for_scenario(kind, p), &EventThresholds::default()).unwrap()
    }

    #[test]
    fn cut_in_profile_endpoints() {
        let s = build_scenario(&ScenarioParams::<f64> {
            lc_start_s: 1.0,
            lc_duration_s: 2.0,
            ..ScenarioParams::default()
        })
        .unwrap();
        assert_eq!(s.lateral_at(0.0).0, 3.75);
        assert_eq!(s.lateral_at(1.0).0, 3.75);
        assert_eq!(s.lateral_at(3.0).0, 0.0);
        assert_eq!(s.lateral_at(5.0).0, 0.0);
        let mut prev = 3.75;
        for i in 1..100 {
            let y = s.lateral_at(1.0 + 2.0 * i as f64 / 100.0).0;
            assert!(y < prev);
            prev = y;
        }
        assert!(s.lateral_at(2.0).1 < 0.0);
    }

    #[test]
    fn cut_out_mirrors_cut_in() {
        let base: ScenarioParams = ScenarioParams {
            lc_start_s: 1.0,
            ..ScenarioParams::default()
        };
        let p = ScenarioParams {
            kind: ScenarioKind::CutOut,
            ..base.clone()
        };
        let out = build_scenario(&p).unwrap();
        let inn = build_scenario(&base).unwrap();
        assert_eq!(out.lateral_at(0.5).0, 0.0);
        assert_eq!(out.lateral_at(3.5).0, 3.75);
        for i in 0..=40 {
            let t = i as f64 * 0.1;
            let (a, b) = (out.lateral_at(t).0, inn.lateral_at(t).0);
            assert!((a + b - 3.75).abs() < 1e-12);
        }
    }

    #[test]
    fn car_following_stays_in_lane_and_follows_profile() {
        let p: ScenarioParams = ScenarioParams {
            kind: ScenarioKind::CarFollowing,
            v_o0: 20.0,
            lead_speed_profile: vec![SpeedSegment { from_s: 2.0, speed_mps: 5.0 }],
            ..ScenarioParams::default()
        };
        let s = build_scenario(&p).unwrap();
        for i in 0..=120 {
            assert_eq!(s.lateral_at(i as f64 * 0.1).0, 0.0);
        }
        let x0 = s.other0.pos_long_m;
        let o = s.other_at(4.0);
        assert!((o.pos_long_m - (x0 + 40.0 + 10.0)).abs() < 1e-9);
        assert_eq!(o.vel_long_mps, 5.0);
    }

    #[test]
    fn invalid_params_are_config_errors() {
        let p = ScenarioParams::<f64> {
            d_x0: 0.0,
            ..ScenarioParams::default()
        };
        let err = build_scenario(&p).unwrap_err();
        assert!(err.to_string().contains("scenario.d_x0"));
        let p = ScenarioParams::<f64> {
            duration_s: 1.5,
            ..ScenarioParams::default()
        };
        assert!(matches!(build_scenario(&p), Err(Error::Config { .. })));
    }

    #[test]
    fn equal_speeds_never_collide() {
        let r = run(&cut_in(20.0, 20.0, 60.0), ModelKind::Rba);
        assert!(!r.collided);
        assert_eq!(r.trace.len(), 241);
        assert!(r.min_ttc_s.is_infinite());
        assert_eq!(r.classification, EventClass::NonCritical);
    }

    #[test]
    fn null_controller_intercepts_closed_form() {
        // Closing from 20 m at 20 m/s; the cut vehicle's body reaches the
        // ego's lane side once its center offset drops below 2 m.
        let p = cut_in(30.0, 10.0, 20.0);
        let r = run(&p, ModelKind::None);
        assert!(r.collided);
        let c: f64 = 1.0 - 2.0 / 3.75;
        let tau = 0.5 - ((1.0 - 2.0 * c).asin() / 3.0).sin();
        let t_lat = p.lc_start_s + tau * p.lc_duration_s;
        let t_long = 20.0 / 20.0;
        let expected = t_lat.max(t_long);
        assert!((expected - 1.0).abs() < 1e-12);
        assert!((r.collision_time_s.unwrap() - expected).abs() <= 2.0 * p.dt_s);
        assert_eq!(r.classification, EventClass::Critical);
        // latch: last sample is the colliding one
        let last = r.trace.last().unwrap();
        assert!(last.gap_long_m < 0.0 && last.gap_lat_m < 0.0);
        assert!(r.trace.iter().rev().skip(1).all(|s| !(s.gap_long_m < 0.0 && s.gap_lat_m < 0.0)));
    }

    #[test]
    fn rba_brakes_where_null_collides() {
        let p = cut_in(25.0, 15.0, 40.0);
        assert!(run(&p, ModelKind::None).collided);
        let r = run(&p, ModelKind::Rba);
        assert!(!r.collided);
        assert!(r.min_gap_long_m > 0.0);
        assert!(r.peak_decel_mps2 > 0.0);
    }

    #[test]
    fn every_model_runs_deterministically() {
        let p = cut_in(25.0, 15.0, 40.0);
        for kind in ModelKind::ALL {
            let a = run(&p, kind);
            let b = run(&p, kind);
            assert_eq!(a, b);
            let v_floor = 0.0;
            for s in &a.trace {
                assert!(s.ego.vel_long_mps >= v_floor);
                if kind != ModelKind::Idm {
                    assert!(s.ego.vel_long_mps <= p.v_e0);
                }
            }
        }
    }

    #[test]
    fn classification_rules() {
        let mut r = run(&cut_in(20.0, 20.0, 60.0), ModelKind::Rba);
        let th = EventThresholds::default();
        assert_eq!(classify_event(&r, &th), EventClass::NonCritical);
        r.min_ttc_s = 1.5;
        assert_eq!(classify_event(&r, &th), EventClass::Critical);
        r.min_ttc_s = f64::INFINITY;
        r.peak_decel_mps2 = 3.5;
        assert_eq!(classify_event(&r, &th), EventClass::Critical);
        r.peak_decel_mps2 = 0.0;
        r.collided = true;
        assert_eq!(classify_event(&r, &th), EventClass::Critical);
    }

    #[test]
    fn feasibility_examples() {
        assert_eq!(feasibility_bound(20.0f64, 20.0, 6.0, 0.5), 0.0);
        assert_eq!(feasibility_bound(10.0f64, 20.0, 6.0, 0.5), 0.0);
        assert!((feasibility_bound(30.0f64, 20.0, 6.0, 0.5) - (5.0 + 100.0 / 12.0)).abs() < 1e-12);
        assert!((feasibility_bound(40.0f64, 20.0, 6.0, 0.5) - (10.0 + 400.0 / 12.0)).abs() < 1e-12);
    }

    #[test]
    fn feasibility_matches_fine_step_braking() {
        // Ego reacts after t_react then brakes at a_max behind a leader at
        // constant speed; from exactly the bound the gap closes to ~0.
        for dv in [10.0f64, 20.0] {
            let bound = feasibility_bound(20.0 + dv, 20.0, 6.0, 0.5);
            let (mut gap, mut rel, h) = (bound, dv, 1e-5);
            let mut t = 0.0;
            let mut min_gap = gap;
            while rel > 0.0 {
                let a = if t < 0.5 { 0.0 } else { 6.0 };
                let rel_next = (rel - a * h).max(0.0);
                gap -= (rel + rel_next) / 2.0 * h;
                rel = rel_next;
                t += h;
                min_gap = min_gap.min(gap);
            }
            assert!(min_gap.abs() < 1e-3, "dv={dv} min_gap={min_gap}");
        }
    }

    #[test]
    fn sweep_cardinality_and_order() {
        let grid = SweepGrid {
            v_e0: vec![20.0, 25.0],
            d_x0: vec![30.0, 60.0],
            ..SweepGrid::default()
        };
        let (rba, rss) = (ModelKind::Rba, ModelKind::Rss);
        let th = EventThresholds::default();
        let one = sweep(&grid, &[rba], &run_derived_params, &th, Some(2)).unwrap();
        assert_eq!(one.len(), 4);
        assert!(one.iter().enumerate().all(|(i, r)| r.grid_index == i));
        let two = sweep(&grid, &[rba, rss], &run_derived_params, &th, None).unwrap();
        assert_eq!(two.len(), 8);
        assert!(two[..4].iter().all(|r| r.model == ModelKind::Rba));
        assert!(two[4..].iter().all(|r| r.model == ModelKind::Rss));
        let again = sweep(&grid, &[rba], &run_derived_params, &th, Some(3)).unwrap();
        assert_eq!(one, again);
        assert!(sweep(&grid, &[], &run_derived_params, &th, None).is_err());
    }

    #[test]
    fn sweep_records_failed_points() {
        let grid = SweepGrid {
            d_x0: vec![-1.0, 30.0],
            ..SweepGrid::default()
        };
        let out = sweep(&grid, &[ModelKind::Rba], &run_derived_params, &EventThresholds::default(), None).unwrap();
        assert!(out[0].outcome.as_ref().unwrap_err().contains("d_x0"));
        assert!(out[1].outcome.is_ok());
    }

    #[test]
    fn runs_in_f32() {
        let p = ScenarioParams::<f32>::default();
        let r = run_closed_loop(&p, &ModelSpec::for_scenario(ModelKind::Rba, &p), &EventThresholds::default()).unwrap();
        assert!(!r.collided);
    }
}
