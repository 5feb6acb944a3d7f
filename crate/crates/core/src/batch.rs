//! Independent scenario runs, spread over threads when the `parallel` feature
//! is enabled.

use crate::engine::{run_with, RunOptions, RunResult, SimError};
use crate::scenario::Scenario;

#[cfg(feature = "parallel")]
pub fn run_batch(scenarios: &[Scenario], opts: &RunOptions) -> Vec<Result<RunResult, SimError>> {
    use rayon::prelude::*;
    scenarios.par_iter().map(|s| run_with(s, opts)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_batch(scenarios: &[Scenario], opts: &RunOptions) -> Vec<Result<RunResult, SimError>> {
    run_batch_sequential(scenarios, opts)
}

/// Always single-threaded; results come back in input order either way.
pub fn run_batch_sequential(scenarios: &[Scenario], opts: &RunOptions) -> Vec<Result<RunResult, SimError>> {
    scenarios.iter().map(|s| run_with(s, opts)).collect()
}
