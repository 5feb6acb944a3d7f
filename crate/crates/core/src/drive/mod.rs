//! Drive-level traction model: induction machine, direct torque control, speed
//! loop and the braking chopper.

use thiserror::Error;

pub mod chopper;
pub mod dtc;
pub mod machine;
pub mod speed;
pub mod traction;

pub use chopper::{chopper_step, ChopperSettings, ChopperState};
pub use dtc::{dtc_select_vector, estimate_flux_torque, DtcBands, DtcState, FluxCmd, TorqueCmd};
pub use machine::{machine_step, GateVector, MachineParams, MachineState};
pub use speed::{field_weakening_flux, pull_out_torque, speed_controller_step, SpeedCtrlState};
pub use traction::{
    emit_waveform, run_torque_step, DriveReference, DriveTotals, IntervalSummary, TractionDrive, WaveformSample,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriveError {
    #[error("invalid drive parameter: {0}")]
    InvalidParam(&'static str),
    #[error("machine state became non-finite")]
    NonFinite,
    #[error("drive diverged at t = {time} s")]
    Diverged { time: f64 },
}
