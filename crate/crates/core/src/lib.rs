//! Regenerative braking energy simulation for DC-electrified rail corridors.

// validation uses `!(x > 0.0)` on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod drive;
pub mod drivetrain;
pub mod energy;
pub mod engine;
pub mod output;
pub mod profile;
pub mod rail;
pub mod scenario;
pub mod solver;
pub mod substation;
pub mod vehicle;

pub use engine::{run, run_with, RunOptions, RunResult, SimError};
pub use scenario::{Direction, Mode, Scenario, TrainSpec};
