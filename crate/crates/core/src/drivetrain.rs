//! Gearbox between axle and motor shaft.

use crate::vehicle::VehicleParams;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorShaftPoint {
    /// Motor-side torque, N*m.
    pub torque: f64,
    /// Motor-side speed, rad/s.
    pub speed: f64,
    /// Gearbox loss torque referred to the axle, N*m (always >= 0).
    pub loss_torque: f64,
}

/// Maps axle torque/speed to the motor shaft.
///
/// The loss torque is `|T_w| (1 - eta)`. It is added to the wheel torque when
/// motoring and taken off the recovered magnitude when braking, so with a signed
/// wheel torque both cases read `(T_w + B) / ratio`.
pub fn wheel_to_motor(wheel_torque: f64, wheel_speed: f64, p: &VehicleParams) -> MotorShaftPoint {
    let loss = wheel_torque.abs() * (1.0 - p.gear_efficiency);
    MotorShaftPoint {
        torque: (wheel_torque + loss) / p.gear_ratio,
        speed: wheel_speed * p.gear_ratio,
        loss_torque: loss,
    }
}

/// One traction motor per axle, four axles per car.
pub fn motor_count(p: &VehicleParams) -> u32 {
    4 * p.n_cars
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn motoring_and_braking_examples() {
        let p = VehicleParams::default();
        let m = wheel_to_motor(1000.0, 10.0, &p);
        assert_relative_eq!(m.loss_torque, 40.0, max_relative = 1e-12);
        assert_relative_eq!(m.torque, 1040.0 / 6.64, max_relative = 1e-12);
        assert_relative_eq!(m.torque, 156.627, epsilon = 5e-4);
        assert_relative_eq!(m.speed, 66.4, max_relative = 1e-12);

        let b = wheel_to_motor(-1000.0, 10.0, &p);
        assert_relative_eq!(b.loss_torque, 40.0, max_relative = 1e-12);
        assert_relative_eq!(b.torque, -960.0 / 6.64, max_relative = 1e-12);
        assert_relative_eq!(b.torque, -144.578, epsilon = 5e-4);

        let z = wheel_to_motor(0.0, 10.0, &p);
        assert_eq!((z.torque, z.loss_torque), (0.0, 0.0));
    }

    #[test]
    fn ideal_gearbox() {
        let p = VehicleParams { gear_efficiency: 1.0, ..Default::default() };
        for t in [-2500.0, -1.0, 0.0, 3.0, 4196.4] {
            assert_eq!(wheel_to_motor(t, 1.0, &p).torque, t / 6.64);
        }
    }

    #[test]
    fn motor_counts() {
        assert_eq!(motor_count(&VehicleParams::default()), 40);
        assert_eq!(motor_count(&VehicleParams { n_cars: 1, ..Default::default() }), 4);
        assert_eq!(motor_count(&VehicleParams { n_cars: 8, ..Default::default() }), 32);
    }
}
