//! Backward-facing longitudinal dynamics: from the prescribed speed trace to the
//! tractive effort at the rail and the torque/speed at each motored axle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{ProfileError, SpeedProfile, MPH_TO_MPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("invalid vehicle parameter: {0}")]
    InvalidParam(&'static str),
    #[error("profile acceleration {accel:.4} m/s^2 on [{t0}, {t1}] s exceeds limit [{min:.4}, {max:.4}]")]
    AccelLimit { t0: f64, t1: f64, accel: f64, min: f64, max: f64 },
}

/// Parameters of one consist. [`Default`] carries the reference vehicle values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// kg per car.
    pub mass_per_car: f64,
    pub n_cars: u32,
    pub rolling_resistance: f64,
    /// N/kg.
    pub gravity: f64,
    /// Track slope, rad.
    pub slope: f64,
    pub drag_coefficient: f64,
    /// m^2.
    pub frontal_area: f64,
    /// kg/m^3.
    pub air_density: f64,
    /// m.
    pub wheel_radius: f64,
    pub gear_ratio: f64,
    pub gear_efficiency: f64,
    /// Braking resistor of one motor drive, ohm.
    pub chopper_resistance: f64,
    pub speed_kp: f64,
    pub speed_ki: f64,
    /// Motor torque limits (min, max), N*m.
    pub torque_limit: (f64, f64),
    /// Acceleration limits (min, max), m/s^2.
    pub accel_limit: (f64, f64),
    /// Inverter + motor efficiency applied at the DC bus in quasi-static mode.
    pub drive_efficiency: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass_per_car: 38_000.0,
            n_cars: 10,
            rolling_resistance: 0.002,
            gravity: 9.81,
            slope: 0.0,
            drag_coefficient: 0.5,
            frontal_area: 9.0,
            air_density: 1.225,
            wheel_radius: 0.432,
            gear_ratio: 6.64,
            gear_efficiency: 0.96,
            chopper_resistance: 2.0,
            speed_kp: 30.0,
            speed_ki: 100.0,
            torque_limit: (-2000.0, 2000.0),
            accel_limit: (-3.0 * MPH_TO_MPS, 3.5 * MPH_TO_MPS),
            drive_efficiency: 1.0,
        }
    }
}

impl VehicleParams {
    /// Total consist mass, kg.
    pub fn total_mass(&self) -> f64 {
        self.mass_per_car * f64::from(self.n_cars)
    }

    pub fn validate(&self) -> Result<(), VehicleError> {
        use VehicleError::InvalidParam;
        if !(self.mass_per_car > 0.0) {
            return Err(InvalidParam("mass_per_car must be > 0"));
        }
        if self.n_cars < 1 {
            return Err(InvalidParam("n_cars must be >= 1"));
        }
        if !(self.gear_efficiency > 0.0 && self.gear_efficiency <= 1.0) {
            return Err(InvalidParam("gear_efficiency must be in (0, 1]"));
        }
        if !(self.drive_efficiency > 0.0 && self.drive_efficiency <= 1.0) {
            return Err(InvalidParam("drive_efficiency must be in (0, 1]"));
        }
        if !(self.wheel_radius > 0.0) {
            return Err(InvalidParam("wheel_radius must be > 0"));
        }
        if !(self.gear_ratio > 0.0) {
            return Err(InvalidParam("gear_ratio must be > 0"));
        }
        if !(self.chopper_resistance > 0.0) {
            return Err(InvalidParam("chopper_resistance must be > 0"));
        }
        if !(self.torque_limit.0 < 0.0 && 0.0 < self.torque_limit.1) {
            return Err(InvalidParam("torque_limit must bracket zero"));
        }
        if !(self.accel_limit.0 < 0.0 && 0.0 < self.accel_limit.1) {
            return Err(InvalidParam("accel_limit must bracket zero"));
        }
        if self.rolling_resistance < 0.0
            || self.drag_coefficient < 0.0
            || self.frontal_area < 0.0
            || self.air_density < 0.0
            || self.gravity < 0.0
        {
            return Err(InvalidParam("resistance coefficients must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceBreakdown {
    /// Tractive effort at the rail, N.
    pub tractive: f64,
    /// Rolling friction, N.
    pub rolling: f64,
    /// Grade force, N.
    pub grade: f64,
    /// Aerodynamic drag, N.
    pub aero: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxleOutput {
    /// Torque per axle, N*m.
    pub torque: f64,
    /// Axle speed, rad/s.
    pub speed: f64,
}

/// Rolling, grade and aerodynamic forces at speed `v`, returned in that order.
pub fn resistive_forces(v: f64, p: &VehicleParams) -> (f64, f64, f64) {
    let m = p.total_mass();
    let rolling = p.rolling_resistance * m * p.gravity * p.slope.cos();
    let grade = m * p.gravity * p.slope.sin();
    let aero = 0.5 * p.drag_coefficient * p.frontal_area * p.air_density * v * v;
    (rolling, grade, aero)
}

/// Force balance rearranged for the tractive effort needed to follow `accel` at `v`.
pub fn tractive_effort(accel: f64, v: f64, p: &VehicleParams) -> ForceBreakdown {
    let (rolling, grade, aero) = resistive_forces(v, p);
    ForceBreakdown { tractive: p.total_mass() * accel + rolling + grade + aero, rolling, grade, aero }
}

/// dv/dt of the active profile segment at `t` (right-hand segment at breakpoints,
/// left-hand at the final sample).
pub fn accel_from_profile(profile: &SpeedProfile, t: f64) -> Result<f64, ProfileError> {
    let left = t >= profile.end_time();
    profile.slope_at(t, left)
}

/// Four motored axles per car share the tractive effort.
pub fn axle_torque_speed(tractive: f64, v: f64, p: &VehicleParams) -> AxleOutput {
    AxleOutput { torque: tractive * p.wheel_radius / (4.0 * f64::from(p.n_cars)), speed: v / p.wheel_radius }
}

/// Checks every profile segment against the acceleration limits.
pub fn check_accel_limits(profile: &SpeedProfile, p: &VehicleParams) -> Result<(), VehicleError> {
    let (min, max) = p.accel_limit;
    // 1e-9 slack so that profiles authored exactly at the limit pass.
    for (t0, t1, accel) in profile.segments() {
        if accel < min - 1e-9 || accel > max + 1e-9 {
            return Err(VehicleError::AccelLimit { t0, t1, accel, min, max });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_defaults() {
        let p = VehicleParams::default();
        assert_eq!(p.total_mass(), 380_000.0);
        assert_relative_eq!(p.accel_limit.0, -1.34112, max_relative = 1e-12);
        assert_relative_eq!(p.accel_limit.1, 1.56464, max_relative = 1e-12);
        p.validate().unwrap();
    }

    #[test]
    fn resistive_forces_at_20_mps() {
        let p = VehicleParams::default();
        let (rolling, grade, aero) = resistive_forces(20.0, &p);
        assert_relative_eq!(rolling, 7455.6, max_relative = 1e-12);
        assert_eq!(grade, 0.0);
        assert_relative_eq!(aero, 1102.5, max_relative = 1e-12);
        assert_eq!(resistive_forces(0.0, &p).2, 0.0);
    }

    #[test]
    fn tractive_effort_examples() {
        let p = VehicleParams::default();
        assert_relative_eq!(tractive_effort(1.0, 20.0, &p).tractive, 388_558.1, max_relative = 1e-12);
        assert_relative_eq!(tractive_effort(0.0, 0.0, &p).tractive, 7455.6, max_relative = 1e-12);
        assert_relative_eq!(tractive_effort(-1.2, 10.0, &p).tractive, -448_268.775, max_relative = 1e-12);
    }

    #[test]
    fn grade_force_on_slope() {
        let p = VehicleParams { slope: 0.01, ..Default::default() };
        let f = tractive_effort(0.0, 0.0, &p);
        assert_relative_eq!(f.grade, 380_000.0 * 9.81 * 0.01f64.sin(), max_relative = 1e-12);
        assert!(f.rolling < 7455.6);
    }

    #[test]
    fn accel_examples() {
        let ramp = SpeedProfile::new(vec![(0.0, 0.0), (10.0, 20.0)]).unwrap();
        assert_eq!(accel_from_profile(&ramp, 5.0).unwrap(), 2.0);
        assert_eq!(accel_from_profile(&ramp, 10.0).unwrap(), 2.0);
        let flat = SpeedProfile::new(vec![(0.0, 5.0), (10.0, 5.0)]).unwrap();
        assert_eq!(accel_from_profile(&flat, 3.0).unwrap(), 0.0);
        let down = SpeedProfile::new(vec![(0.0, 20.0), (10.0, 0.0)]).unwrap();
        assert_eq!(accel_from_profile(&down, 5.0).unwrap(), -2.0);
        assert!(accel_from_profile(&down, 11.0).is_err());
    }

    #[test]
    fn axle_examples() {
        let p = VehicleParams::default();
        let a = axle_torque_speed(388_558.1, 20.0, &p);
        assert_relative_eq!(a.torque, 4_196.427_48, max_relative = 1e-8);
        assert_relative_eq!(a.speed, 46.296_296_296, max_relative = 1e-9);
        assert_eq!(axle_torque_speed(0.0, 20.0, &p).torque, 0.0);
        assert_eq!(axle_torque_speed(1.0, 0.0, &p).speed, 0.0);
    }

    #[test]
    fn accel_limit_check() {
        let p = VehicleParams::default();
        let ok = SpeedProfile::new(vec![(0.0, 0.0), (10.0, 15.0), (30.0, 0.0)]).unwrap();
        check_accel_limits(&ok, &p).unwrap();
        let steep = SpeedProfile::new(vec![(0.0, 0.0), (5.0, 15.0)]).unwrap();
        assert!(matches!(check_accel_limits(&steep, &p), Err(VehicleError::AccelLimit { .. })));
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = VehicleParams { gear_efficiency: 1.2, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = VehicleParams { torque_limit: (10.0, 2000.0), ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = VehicleParams { n_cars: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
