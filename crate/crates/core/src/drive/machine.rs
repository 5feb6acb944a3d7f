//! Squirrel-cage induction machine in the stationary alpha-beta frame, fed by a
//! two-level voltage-source inverter.
//!
//! States are the stator and rotor flux linkages plus the mechanical rotor speed.
//! Quantities use the amplitude-invariant Clarke transform, so instantaneous
//! electrical power is `1.5 * (v . i)`.

use serde::{Deserialize, Serialize};

use super::DriveError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineParams {
    pub r_s: f64,
    pub r_r: f64,
    pub l_s: f64,
    pub l_r: f64,
    pub l_m: f64,
    pub pole_pairs: u32,
    /// Rotor inertia, kg*m^2.
    pub inertia: f64,
    /// Stator flux at and below base speed, Wb.
    pub rated_flux: f64,
    /// Reference for the torque hysteresis band, N*m.
    pub rated_torque: f64,
}

impl Default for MachineParams {
    fn default() -> Self {
        Self {
            r_s: 29.7e-3,
            r_r: 22.1e-3,
            l_s: 35.3e-3,
            l_r: 35.3e-3,
            l_m: 34.6e-3,
            pole_pairs: 2,
            inertia: 0.8,
            rated_flux: 0.9,
            rated_torque: 2000.0,
        }
    }
}

impl MachineParams {
    pub fn validate(&self) -> Result<(), DriveError> {
        let positive =
            [self.r_s, self.r_r, self.l_s, self.l_r, self.l_m, self.inertia, self.rated_flux, self.rated_torque];
        if positive.iter().any(|x| !(*x > 0.0)) || self.pole_pairs == 0 {
            return Err(DriveError::InvalidParam("machine parameters must be positive"));
        }
        if !(self.l_s * self.l_r > self.l_m * self.l_m) {
            return Err(DriveError::InvalidParam("machine needs leakage: l_s * l_r > l_m^2"));
        }
        Ok(())
    }

    fn det(&self) -> f64 {
        self.l_s * self.l_r - self.l_m * self.l_m
    }

    /// Total leakage factor sigma.
    pub fn leakage(&self) -> f64 {
        self.det() / (self.l_s * self.l_r)
    }
}

/// Inverter switch state; index 0 and 7 are the zero vectors, 1..=6 the active
/// vectors spaced 60 degrees apart starting on the alpha axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GateVector(pub u8);

impl GateVector {
    const LEGS: [[bool; 3]; 8] = [
        [false, false, false],
        [true, false, false],
        [true, true, false],
        [false, true, false],
        [false, true, true],
        [false, false, true],
        [true, false, true],
        [true, true, true],
    ];

    pub fn legs(self) -> [bool; 3] {
        Self::LEGS[usize::from(self.0 & 7)]
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0 || self.0 == 7
    }

    /// Stator voltage produced at DC-link voltage `v_dc`, V (alpha, beta).
    pub fn voltage(self, v_dc: f64) -> [f64; 2] {
        let [a, b, c] = self.legs().map(|on| if on { 1.0 } else { 0.0 });
        let k = 2.0 / 3.0 * v_dc;
        let s3 = 3f64.sqrt() / 2.0;
        [k * (a - 0.5 * b - 0.5 * c), k * (s3 * b - s3 * c)]
    }

    /// Number of inverter legs that change state.
    pub fn transitions(self, other: GateVector) -> usize {
        self.legs().iter().zip(other.legs()).filter(|(a, b)| **a != *b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MachineState {
    pub psi_s: [f64; 2],
    pub psi_r: [f64; 2],
    /// Mechanical rotor speed, rad/s.
    pub omega_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MachineOutputs {
    pub i_s: [f64; 2],
    pub i_r: [f64; 2],
    pub torque: f64,
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl MachineState {
    /// Machine at standstill (or `omega_m`) carrying steady DC magnetisation with
    /// stator flux `flux` on the alpha axis.
    pub fn magnetised(m: &MachineParams, flux: f64, omega_m: f64) -> Self {
        Self { psi_s: [flux, 0.0], psi_r: [flux * m.l_m / m.l_s, 0.0], omega_m }
    }

    pub fn outputs(&self, m: &MachineParams) -> MachineOutputs {
        let d = m.det();
        let i_s =
            [(m.l_r * self.psi_s[0] - m.l_m * self.psi_r[0]) / d, (m.l_r * self.psi_s[1] - m.l_m * self.psi_r[1]) / d];
        let i_r =
            [(m.l_s * self.psi_r[0] - m.l_m * self.psi_s[0]) / d, (m.l_s * self.psi_r[1] - m.l_m * self.psi_s[1]) / d];
        let torque = 1.5 * f64::from(m.pole_pairs) * cross(self.psi_s, i_s);
        MachineOutputs { i_s, i_r, torque }
    }

    /// Magnetic energy stored in the windings, J.
    pub fn magnetic_energy(&self, m: &MachineParams) -> f64 {
        let o = self.outputs(m);
        0.75 * (dot(self.psi_s, o.i_s) + dot(self.psi_r, o.i_r))
    }

    pub fn stator_flux(&self) -> f64 {
        self.psi_s[0].hypot(self.psi_s[1])
    }

    fn derivative(&self, m: &MachineParams, v_s: [f64; 2], load: f64) -> [f64; 5] {
        let o = self.outputs(m);
        let omega_e = f64::from(m.pole_pairs) * self.omega_m;
        [
            v_s[0] - m.r_s * o.i_s[0],
            v_s[1] - m.r_s * o.i_s[1],
            -m.r_r * o.i_r[0] - omega_e * self.psi_r[1],
            -m.r_r * o.i_r[1] + omega_e * self.psi_r[0],
            (o.torque - load) / m.inertia,
        ]
    }

    fn offset(&self, k: &[f64; 5], h: f64) -> Self {
        Self {
            psi_s: [self.psi_s[0] + h * k[0], self.psi_s[1] + h * k[1]],
            psi_r: [self.psi_r[0] + h * k[2], self.psi_r[1] + h * k[3]],
            omega_m: self.omega_m + h * k[4],
        }
    }

    fn is_finite(&self) -> bool {
        self.psi_s.iter().chain(&self.psi_r).all(|x| x.is_finite()) && self.omega_m.is_finite()
    }
}

/// Energy flows over one machine step, J. Power integrals use the trapezoid rule
/// on the step end points.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepEnergy {
    pub electrical: f64,
    pub copper: f64,
    pub mechanical: f64,
    pub magnetic_delta: f64,
}

impl StepEnergy {
    /// Power-balance mismatch of the step, J.
    pub fn imbalance(&self) -> f64 {
        self.electrical - self.copper - self.mechanical - self.magnetic_delta
    }
}

fn instantaneous(m: &MachineParams, s: &MachineState, v_s: [f64; 2]) -> (f64, f64, f64) {
    let o = s.outputs(m);
    let electrical = 1.5 * dot(v_s, o.i_s);
    let copper = 1.5 * (m.r_s * dot(o.i_s, o.i_s) + m.r_r * dot(o.i_r, o.i_r));
    let mechanical = o.torque * s.omega_m;
    (electrical, copper, mechanical)
}

/// Advances the machine by `dt` with the inverter held at `gate` (classical RK4).
pub fn machine_step(
    gate: GateVector,
    v_dc: f64,
    load_torque: f64,
    dt: f64,
    state: &MachineState,
    m: &MachineParams,
) -> Result<(MachineState, StepEnergy), DriveError> {
    let v_s = gate.voltage(v_dc);
    let k1 = state.derivative(m, v_s, load_torque);
    let k2 = state.offset(&k1, 0.5 * dt).derivative(m, v_s, load_torque);
    let k3 = state.offset(&k2, 0.5 * dt).derivative(m, v_s, load_torque);
    let k4 = state.offset(&k3, dt).derivative(m, v_s, load_torque);
    let mut incr = [0.0; 5];
    for j in 0..5 {
        incr[j] = (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0;
    }
    let next = state.offset(&incr, dt);
    if !next.is_finite() {
        return Err(DriveError::NonFinite);
    }
    let (e0, c0, m0) = instantaneous(m, state, v_s);
    let (e1, c1, m1) = instantaneous(m, &next, v_s);
    let energy = StepEnergy {
        electrical: 0.5 * (e0 + e1) * dt,
        copper: 0.5 * (c0 + c1) * dt,
        mechanical: 0.5 * (m0 + m1) * dt,
        magnetic_delta: next.magnetic_energy(m) - state.magnetic_energy(m),
    };
    Ok((next, energy))
}
