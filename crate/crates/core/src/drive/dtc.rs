//! Direct torque control: flux/torque estimator, hysteresis comparators and the
//! six-sector switching table.

use std::f64::consts::PI;

use super::machine::{GateVector, MachineParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TorqueCmd {
    Increase,
    #[default]
    Hold,
    Decrease,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxCmd {
    #[default]
    Increase,
    Decrease,
}

/// Hysteresis half-widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtcBands {
    /// N*m.
    pub torque: f64,
    /// Wb.
    pub flux: f64,
}

impl DtcBands {
    /// 5 % of rated torque and 2 % of rated flux.
    pub fn for_machine(m: &MachineParams) -> Self {
        Self { torque: 0.05 * m.rated_torque, flux: 0.02 * m.rated_flux }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DtcState {
    pub psi_alpha: f64,
    pub psi_beta: f64,
    pub torque_cmd: TorqueCmd,
    pub flux_cmd: FluxCmd,
    /// 1..=6
    pub sector: u8,
    pub gate: GateVector,
}

impl DtcState {
    pub fn with_flux(psi_alpha: f64, psi_beta: f64) -> Self {
        Self { psi_alpha, psi_beta, sector: sector_of(psi_alpha, psi_beta), ..Default::default() }
    }

    pub fn flux_magnitude(&self) -> f64 {
        self.psi_alpha.hypot(self.psi_beta)
    }
}

/// Sector 1 spans [-30, 30) degrees, numbering counter-clockwise.
pub fn sector_of(psi_alpha: f64, psi_beta: f64) -> u8 {
    let angle = psi_beta.atan2(psi_alpha) + PI / 6.0;
    let k = (angle.rem_euclid(2.0 * PI) / (PI / 3.0)).floor() as u8;
    k.min(5) + 1
}

/// Integrates the stator voltage behind the stator resistance and evaluates the
/// electromagnetic torque from the updated flux and the measured current.
pub fn estimate_flux_torque(
    v_s: [f64; 2],
    i_s: [f64; 2],
    dt: f64,
    state: &DtcState,
    m: &MachineParams,
) -> (DtcState, f64) {
    let mut next = *state;
    next.psi_alpha += (v_s[0] - m.r_s * i_s[0]) * dt;
    next.psi_beta += (v_s[1] - m.r_s * i_s[1]) * dt;
    next.sector = sector_of(next.psi_alpha, next.psi_beta);
    let torque = 1.5 * f64::from(m.pole_pairs) * (next.psi_alpha * i_s[1] - next.psi_beta * i_s[0]);
    (next, torque)
}

fn torque_comparator(err: f64, band: f64, prev: TorqueCmd) -> TorqueCmd {
    if err > band {
        TorqueCmd::Increase
    } else if err < -band {
        TorqueCmd::Decrease
    } else if (prev == TorqueCmd::Increase && err < 0.0) || (prev == TorqueCmd::Decrease && err > 0.0) {
        TorqueCmd::Hold
    } else {
        prev
    }
}

fn flux_comparator(err: f64, band: f64, prev: FluxCmd) -> FluxCmd {
    if err > band {
        FluxCmd::Increase
    } else if err < -band {
        FluxCmd::Decrease
    } else {
        prev
    }
}

/// Classic switching table. Zero vectors pick whichever of 000/111 needs one leg
/// to switch from `last`.
pub fn switching_table(sector: u8, flux: FluxCmd, torque: TorqueCmd, last: GateVector) -> GateVector {
    let shift: i8 = match (flux, torque) {
        (_, TorqueCmd::Hold) => {
            let z0 = GateVector(0);
            let z7 = GateVector(7);
            return if last.transitions(z0) <= last.transitions(z7) { z0 } else { z7 };
        }
        (FluxCmd::Increase, TorqueCmd::Increase) => 1,
        (FluxCmd::Increase, TorqueCmd::Decrease) => -1,
        (FluxCmd::Decrease, TorqueCmd::Increase) => 2,
        (FluxCmd::Decrease, TorqueCmd::Decrease) => -2,
    };
    let k = (i16::from(sector) - 1 + i16::from(shift)).rem_euclid(6) + 1;
    GateVector(k as u8)
}

/// Updates both comparators (they keep their memory inside the bands) and picks
/// the inverter vector.
pub fn dtc_select_vector(
    t_ref: f64,
    t_est: f64,
    psi_ref: f64,
    state: &DtcState,
    bands: &DtcBands,
) -> (DtcState, GateVector) {
    let mut next = *state;
    next.torque_cmd = torque_comparator(t_ref - t_est, bands.torque, state.torque_cmd);
    next.flux_cmd = flux_comparator(psi_ref - state.flux_magnitude(), bands.flux, state.flux_cmd);
    let gate = switching_table(state.sector, next.flux_cmd, next.torque_cmd, state.gate);
    next.gate = gate;
    (next, gate)
}
