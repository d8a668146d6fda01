//! Vehicle state, exact constant-acceleration stepping, bumper gaps and
//! rectangle-overlap collision detection.
//!
//! Frame: `x` grows in the direction of travel, `y` grows to the left. Lane
//! centers sit at `y = k * lane_width`. Positions are vehicle centers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_LANE_WIDTH_M: f64 = 3.75;

/// Footprint of a vehicle as an axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleDims<T = f64> {
    pub width_m: T,
    pub length_m: T,
}

impl<T: Scalar> VehicleDims<T> {
    pub fn new(width_m: T, length_m: T) -> Result<Self> {
        let dims = Self { width_m, length_m };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width_m.is_finite() && self.width_m > T::zero()) {
            return Err(Error::invalid(format!("vehicle width must be > 0, got {}", self.width_m)));
        }
        if !(self.length_m.is_finite() && self.length_m > T::zero()) {
            return Err(Error::invalid(format!("vehicle length must be > 0, got {}", self.length_m)));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for VehicleDims<T> {
    /// 5 m x 2 m passenger car.
    fn default() -> Self {
        Self {
            width_m: T::lit(2.0),
            length_m: T::lit(5.0),
        }
    }
}

/// Kinematic state of one vehicle at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState<T = f64> {
    pub pos_long_m: T,
    pub pos_lat_m: T,
    pub vel_long_mps: T,
    pub vel_lat_mps: T,
}

impl<T: Scalar> VehicleState<T> {
    pub fn new(pos_long_m: T, pos_lat_m: T, vel_long_mps: T, vel_lat_mps: T) -> Self {
        Self {
            pos_long_m,
            pos_lat_m,
            vel_long_mps,
            vel_lat_mps,
        }
    }

    /// State travelling straight along the lane at `y`.
    pub fn cruising(x: T, y: T, v: T) -> Self {
        Self::new(x, y, v, T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.pos_long_m.is_finite()
            && self.pos_lat_m.is_finite()
            && self.vel_long_mps.is_finite()
            && self.vel_lat_mps.is_finite()
    }
}

/// One sample of a closed-loop trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample<T = f64> {
    pub t_s: T,
    pub ego: VehicleState<T>,
    pub other: VehicleState<T>,
    pub gap_long_m: T,
    pub gap_lat_m: T,
    /// Infinite when the vehicles are not closing or not in conflict.
    pub ttc_s: T,
    pub safe: bool,
    pub decel_cmd_mps2: T,
}

/// Advances one vehicle by `dt_s` under constant accelerations.
///
/// Longitudinal motion is integrated exactly. If the longitudinal velocity
/// would cross zero inside the step, the vehicle stops at the crossing
/// instant and stays there for the rest of the step. Lateral motion is plain
/// constant-acceleration integration (lateral velocity is signed).
pub fn step_vehicle<T: Scalar>(
    state: &VehicleState<T>,
    accel_long_mps2: T,
    accel_lat_mps2: T,
    dt_s: T,
) -> Result<VehicleState<T>> {
    if !(state.is_finite() && accel_long_mps2.is_finite() && accel_lat_mps2.is_finite()) {
        return Err(Error::invalid("non-finite state or acceleration"));
    }
    if !(dt_s.is_finite() && dt_s > T::zero()) {
        return Err(Error::invalid(format!("time step must be > 0, got {dt_s}")));
    }
    if state.vel_long_mps < T::zero() {
        return Err(Error::invalid(format!(
            "longitudinal velocity must be >= 0, got {}",
            state.vel_long_mps
        )));
    }

    let v0 = state.vel_long_mps;
    let v1 = v0 + accel_long_mps2 * dt_s;
    let (vel_long, dx) = if v1 < T::zero() {
        // a < 0 here; stops at t = v0 / |a| after travelling v0^2 / (2|a|)
        (T::zero(), v0 * v0 / (T::two() * -accel_long_mps2))
    } else {
        (v1, v0 * dt_s + T::half() * accel_long_mps2 * dt_s * dt_s)
    };

    let vy0 = state.vel_lat_mps;
    Ok(VehicleState {
        pos_long_m: state.pos_long_m + dx,
        pos_lat_m: state.pos_lat_m + vy0 * dt_s + T::half() * accel_lat_mps2 * dt_s * dt_s,
        vel_long_mps: vel_long,
        vel_lat_mps: vy0 + accel_lat_mps2 * dt_s,
    })
}

/// Bumper-to-bumper longitudinal gap; negative when the footprints overlap
/// along `x`.
pub fn gap_longitudinal<T: Scalar>(
    ego: &VehicleState<T>,
    other: &VehicleState<T>,
    ego_dims: &VehicleDims<T>,
    other_dims: &VehicleDims<T>,
) -> T {
    (ego.pos_long_m - other.pos_long_m).abs() - (ego_dims.length_m + other_dims.length_m) / T::two()
}

/// Side-to-side lateral gap; negative when the footprints overlap along `y`.
pub fn gap_lateral<T: Scalar>(
    ego: &VehicleState<T>,
    other: &VehicleState<T>,
    ego_dims: &VehicleDims<T>,
    other_dims: &VehicleDims<T>,
) -> T {
    (ego.pos_lat_m - other.pos_lat_m).abs() - (ego_dims.width_m + other_dims.width_m) / T::two()
}

/// Axis-aligned rectangle intersection.
pub fn overlaps<T: Scalar>(
    ego: &VehicleState<T>,
    other: &VehicleState<T>,
    ego_dims: &VehicleDims<T>,
    other_dims: &VehicleDims<T>,
) -> bool {
    gap_longitudinal(ego, other, ego_dims, other_dims) < T::zero()
        && gap_lateral(ego, other, ego_dims, other_dims) < T::zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Integrates with `n` substeps averaging old and new velocity; the
    /// velocity is clamped at zero independently of the closed form.
    fn substep_oracle(v0: f64, a: f64, dt: f64, n: usize) -> (f64, f64) {
        let h = dt / n as f64;
        let (mut x, mut v) = (0.0, v0);
        for _ in 0..n {
            let v_next = (v + a * h).max(0.0);
            if v > 0.0 && v_next == 0.0 {
                let t_stop = v / -a;
                x += v * t_stop / 2.0;
            } else {
                x += (v + v_next) / 2.0 * h;
            }
            v = v_next;
        }
        (x, v)
    }

    fn at(x: f64, v: f64) -> VehicleState {
        VehicleState::cruising(x, 0.0, v)
    }

    #[test]
    fn zero_accel_identity() {
        let s = step_vehicle(&at(0.0, 20.0), 0.0, 0.0, 0.1).unwrap();
        assert_eq!(s.vel_long_mps, 20.0);
        assert_eq!(s.pos_long_m, 2.0);
    }

    #[test]
    fn braking_step_matches_substep_oracle() {
        let s = step_vehicle(&at(0.0, 20.0), -5.0, 0.0, 0.1).unwrap();
        let (x_ref, v_ref) = substep_oracle(20.0, -5.0, 0.1, 10_000);
        assert!((s.vel_long_mps - 19.5).abs() < 1e-12);
        assert!((s.pos_long_m - 1.975).abs() < 1e-12);
        assert!((s.pos_long_m - x_ref).abs() < 1e-6);
        assert!((s.vel_long_mps - v_ref).abs() < 1e-6);
    }

    #[test]
    fn stops_mid_step() {
        let s = step_vehicle(&at(0.0, 0.2), -6.0, 0.0, 0.1).unwrap();
        let (x_ref, _) = substep_oracle(0.2, -6.0, 0.1, 10_000);
        assert_eq!(s.vel_long_mps, 0.0);
        assert!((s.pos_long_m - 0.2 * 0.2 / 12.0).abs() < 1e-12);
        assert!((s.pos_long_m - x_ref).abs() < 1e-6);
    }

    #[test]
    fn stopped_vehicle_stays_put_under_braking() {
        let s = step_vehicle(&at(3.0, 0.0), -6.0, 0.0, 0.1).unwrap();
        assert_eq!(s.pos_long_m, 3.0);
        assert_eq!(s.vel_long_mps, 0.0);
    }

    #[test]
    fn lateral_motion_is_signed() {
        let s: VehicleState = VehicleState::new(0.0, 3.75, 20.0, -1.0);
        let n = step_vehicle(&s, 0.0, -2.0, 0.5).unwrap();
        assert!((n.pos_lat_m - (3.75 - 0.5 - 0.25)).abs() < 1e-12);
        assert!((n.vel_lat_mps + 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(step_vehicle(&at(0.0, 1.0), f64::NAN, 0.0, 0.1).is_err());
        assert!(step_vehicle(&at(f64::INFINITY, 1.0), 0.0, 0.0, 0.1).is_err());
        assert!(step_vehicle(&at(0.0, 1.0), 0.0, 0.0, 0.0).is_err());
        assert!(step_vehicle(&at(0.0, -1.0), 0.0, 0.0, 0.1).is_err());
        assert!(VehicleDims::new(0.0, 5.0).is_err());
        assert!(VehicleDims::new(2.0, -1.0).is_err());
    }

    #[test]
    fn gap_examples() {
        let d5 = VehicleDims::new(2.0, 5.0).unwrap();
        assert_eq!(gap_longitudinal(&at(0.0, 0.0), &at(40.0, 0.0), &d5, &d5), 35.0);
        assert_eq!(gap_longitudinal(&at(0.0, 0.0), &at(0.0, 0.0), &d5, &d5), -5.0);
        let d4 = VehicleDims::new(2.0, 4.0).unwrap();
        let d6 = VehicleDims::new(2.0, 6.0).unwrap();
        assert_eq!(gap_longitudinal(&at(40.0, 0.0), &at(0.0, 0.0), &d4, &d6), 35.0);

        let lat = |y: f64| VehicleState::cruising(0.0, y, 0.0);
        assert_eq!(gap_lateral(&lat(0.0), &lat(3.75), &d5, &d5), 1.75);
        assert_eq!(gap_lateral(&lat(0.0), &lat(0.5), &d5, &d5), -1.5);
        let w18 = VehicleDims::new(1.8, 5.0).unwrap();
        let w22 = VehicleDims::new(2.2, 5.0).unwrap();
        assert!((gap_lateral(&lat(1.0), &lat(1.0), &w18, &w22) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn overlap_examples() {
        let d: VehicleDims = VehicleDims::default();
        let a: VehicleState = VehicleState::cruising(10.0, 1.0, 5.0);
        assert!(overlaps(&a, &a, &d, &d));
        // gap_long = 35, gap_lat = -1.5
        let b: VehicleState = VehicleState::cruising(40.0, 0.5, 5.0);
        assert!(!overlaps(&VehicleState::cruising(0.0, 0.0, 5.0), &b, &d, &d));
        // gap_long = -1, gap_lat = -0.1
        let c: VehicleState = VehicleState::cruising(4.0, 1.9, 5.0);
        assert!(overlaps(&VehicleState::cruising(0.0, 0.0, 5.0), &c, &d, &d));
    }

    #[test]
    fn generic_over_f32() {
        let s = VehicleState::<f32>::cruising(0.0, 0.0, 20.0);
        let n = step_vehicle(&s, -5.0f32, 0.0, 0.1).unwrap();
        assert!((n.pos_long_m - 1.975f32).abs() < 1e-5);
        let d = VehicleDims::<f32>::default();
        let o = VehicleState::<f32>::cruising(40.0, 0.0, 20.0);
        assert_eq!(gap_longitudinal(&s, &o, &d, &d), 35.0f32);
    }

    fn state() -> impl Strategy<Value = VehicleState> {
        (-500.0..500.0f64, -10.0..10.0f64, 0.0..60.0f64, -3.0..3.0f64)
            .prop_map(|(x, y, v, vy)| VehicleState::new(x, y, v, vy))
    }

    fn dims() -> impl Strategy<Value = VehicleDims> {
        (0.5..3.0f64, 1.0..20.0f64).prop_map(|(w, l)| VehicleDims::new(w, l).unwrap())
    }

    proptest! {
        #[test]
        fn zero_accel_bit_exact(s in state(), dt in 0.001..1.0f64) {
            let n = step_vehicle(&s, 0.0, 0.0, dt).unwrap();
            prop_assert_eq!(n.vel_long_mps, s.vel_long_mps);
            prop_assert_eq!(n.pos_long_m, s.pos_long_m + s.vel_long_mps * dt);
        }

        #[test]
        fn velocity_never_negative_and_no_teleport(
            s in state(), a in -20.0..10.0f64, dt in 0.001..2.0f64
        ) {
            let n = step_vehicle(&s, a, 0.0, dt).unwrap();
            prop_assert!(n.vel_long_mps >= 0.0);
            let moved = (n.pos_long_m - s.pos_long_m).abs();
            let bound = s.vel_long_mps * dt + 0.5 * a.abs() * dt * dt;
            prop_assert!(moved <= bound * (1.0 + 1e-12) + 1e-9);
        }

        #[test]
        fn gaps_symmetric(a in state(), b in state(), da in dims(), db in dims()) {
            prop_assert_eq!(gap_longitudinal(&a, &b, &da, &db), gap_longitudinal(&b, &a, &db, &da));
            prop_assert_eq!(gap_lateral(&a, &b, &da, &db), gap_lateral(&b, &a, &db, &da));
            prop_assert_eq!(overlaps(&a, &b, &da, &db), overlaps(&b, &a, &db, &da));
            if gap_longitudinal(&a, &b, &da, &db) >= 0.0 || gap_lateral(&a, &b, &da, &db) >= 0.0 {
                prop_assert!(!overlaps(&a, &b, &da, &db));
            }
        }
    }
}
