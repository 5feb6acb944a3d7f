//! PI speed controller producing the torque and flux references for DTC.

use super::machine::MachineParams;
use crate::vehicle::VehicleParams;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpeedCtrlState {
    /// Integral action, N*m.
    pub integrator: f64,
    pub t_ref: f64,
    pub psi_ref: f64,
}

impl SpeedCtrlState {
    pub fn new(rated_flux: f64) -> Self {
        Self { integrator: 0.0, t_ref: 0.0, psi_ref: rated_flux }
    }
}

/// One controller sample. The integrator is frozen while the output sits on a
/// torque limit (conditional integration).
pub fn speed_controller_step(
    omega_ref: f64,
    omega: f64,
    dt: f64,
    s: &SpeedCtrlState,
    p: &VehicleParams,
) -> SpeedCtrlState {
    limited_step(omega_ref, omega, dt, s, p, p.torque_limit)
}

/// As [`speed_controller_step`] with an output range tighter than the vehicle's
/// torque limit.
pub fn limited_step(
    omega_ref: f64,
    omega: f64,
    dt: f64,
    s: &SpeedCtrlState,
    p: &VehicleParams,
    (lo, hi): (f64, f64),
) -> SpeedCtrlState {
    let err = omega_ref - omega;
    let integrator = s.integrator + p.speed_ki * err * dt;
    let raw = p.speed_kp * err + integrator;
    let t_ref = raw.clamp(lo, hi);
    let integrator = if raw == t_ref { integrator } else { s.integrator };
    SpeedCtrlState { integrator, t_ref, psi_ref: s.psi_ref }
}

/// Voltage available for the fundamental, as a fraction of the DC link.
pub const FIELD_WEAKENING_GAIN: f64 = 0.55;

/// Stator flux reference above base speed: the rated flux is kept until the back
/// EMF would exceed what the inverter can impose, then falls as `1 / omega`.
pub fn field_weakening_flux(rated_flux: f64, v_dc: f64, omega_e: f64) -> f64 {
    let w = omega_e.abs();
    if w * rated_flux <= FIELD_WEAKENING_GAIN * v_dc {
        rated_flux
    } else {
        FIELD_WEAKENING_GAIN * v_dc / w
    }
}

/// Share of the pull-out torque the torque reference may use.
pub const PULL_OUT_MARGIN: f64 = 0.8;

/// Breakdown torque of the machine at stator flux `psi`, N*m.
pub fn pull_out_torque(psi: f64, m: &MachineParams) -> f64 {
    let sigma = m.leakage();
    1.5 * f64::from(m.pole_pairs) * psi * psi * (1.0 - sigma) / (2.0 * sigma * m.l_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn examples() {
        let p = VehicleParams::default();
        let s = SpeedCtrlState::new(0.9);
        assert_eq!(speed_controller_step(5.0, 5.0, 1e-3, &s, &p).t_ref, 0.0);
        assert_relative_eq!(speed_controller_step(10.0, 0.0, 1e-12, &s, &p).t_ref, 300.0, max_relative = 1e-9);
        for int in [0.0, 100.0, 1500.0] {
            let s = SpeedCtrlState { integrator: int, ..s };
            let n = speed_controller_step(100.0, 0.0, 1e-3, &s, &p);
            assert_eq!(n.t_ref, 2000.0);
            assert_eq!(n.integrator, int);
        }
        assert_eq!(speed_controller_step(0.0, 100.0, 1e-3, &s, &p).t_ref, -2000.0);
    }

    #[test]
    fn anti_windup_recovers_without_overshoot() {
        let p = VehicleParams::default();
        let mut s = SpeedCtrlState::new(0.9);
        let dt = 1e-3;
        for _ in 0..10_000 {
            s = speed_controller_step(200.0, 0.0, dt, &s, &p);
            assert_eq!(s.t_ref, 2000.0);
        }
        let pinned = s.integrator;
        // error reverses: output leaves the limit at once
        let e = -1.0;
        let n = speed_controller_step(0.0, 1.0, dt, &s, &p);
        let expected = pinned + p.speed_kp * e + p.speed_ki * e * dt;
        assert_relative_eq!(n.t_ref, expected, max_relative = 1e-12);
        assert!(n.t_ref <= pinned + p.speed_kp.abs() * 1.0);
        assert!(n.t_ref < 2000.0);
    }

    #[test]
    fn pull_out_of_default_machine() {
        let m = MachineParams::default();
        let t = pull_out_torque(0.9, &m);
        assert!((t - 840.0).abs() < 15.0, "{t}");
        assert!((pull_out_torque(0.45, &m) - t / 4.0).abs() < 1e-9);
    }

    #[test]
    fn tighter_range_freezes_integrator() {
        let p = VehicleParams::default();
        let s = SpeedCtrlState { integrator: 100.0, ..SpeedCtrlState::new(0.9) };
        let n = limited_step(50.0, 0.0, 1e-3, &s, &p, (-500.0, 500.0));
        assert_eq!(n.t_ref, 500.0);
        assert_eq!(n.integrator, 100.0);
    }

    #[test]
    fn flux_weakens_above_base_speed() {
        assert_eq!(field_weakening_flux(0.9, 650.0, 0.0), 0.9);
        assert_eq!(field_weakening_flux(0.9, 650.0, 350.0), 0.9);
        let f = field_weakening_flux(0.9, 650.0, 600.0);
        assert_relative_eq!(f, 0.55 * 650.0 / 600.0, max_relative = 1e-12);
        assert_eq!(field_weakening_flux(0.9, 650.0, -600.0), f);
    }
}
