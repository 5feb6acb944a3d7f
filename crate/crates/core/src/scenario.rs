//! Scenario files: one TOML document describing the corridor, its substations and
//! the trains with their speed profiles.
//!
//! ```toml
//! mode = "quasi_static"
//! dt_network = 0.1
//!
//! [layout]
//! stations = [0.0, 600.0, 1200.0]
//!
//! [[substations]]
//! position = 600.0
//!
//! [[trains]]
//! profile = "profiles/run.csv"   # or: points = [[0, 0], [37.4, 18.5], [63, 0]]
//! initial_position = 0.0
//! direction = "eastbound"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drive::{ChopperSettings, MachineParams};
use crate::profile::{parse_speed_profile, ProfileError, SpeedProfile, SpeedUnit};
use crate::rail::TrackLayout;
use crate::solver::SolverOptions;
use crate::substation::SubstationParams;
use crate::vehicle::VehicleParams;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario syntax at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("train {train} profile: {source}")]
    Profile { train: usize, source: ProfileError },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    QuasiStatic,
    DriveLevel,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quasi_static" => Ok(Mode::QuasiStatic),
            "drive_level" => Ok(Mode::DriveLevel),
            other => Err(format!("unknown mode '{other}' (expected quasi_static or drive_level)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::QuasiStatic => "quasi_static",
            Mode::DriveLevel => "drive_level",
        })
    }
}

/// Eastbound trains run towards increasing position on one track, westbound
/// trains towards decreasing position on the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Eastbound,
    Westbound,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Eastbound => 1.0,
            Direction::Westbound => -1.0,
        }
    }

    pub fn track(self) -> usize {
        match self {
            Direction::Eastbound => 0,
            Direction::Westbound => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub vehicle: VehicleParams,
    pub profile: SpeedProfile,
    pub initial_position: f64,
    pub direction: Direction,
    pub chopper: ChopperSettings,
}

impl TrainSpec {
    pub fn new(profile: SpeedProfile, initial_position: f64, direction: Direction) -> Self {
        Self {
            vehicle: VehicleParams::default(),
            profile,
            initial_position,
            direction,
            chopper: ChopperSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mode: Mode,
    /// Network solve interval, s.
    pub dt_network: f64,
    /// Drive control period, s (drive_level only).
    pub dt_control: f64,
    pub solver: SolverOptions,
    /// The substation positions mirror `substations`.
    pub layout: TrackLayout,
    pub substations: Vec<SubstationParams>,
    pub trains: Vec<TrainSpec>,
    pub machine: MachineParams,
    /// Reject profiles that exceed the vehicle acceleration limits instead of
    /// logging a warning.
    pub strict_accel_limits: bool,
}

pub const DEFAULT_DT_NETWORK: f64 = 0.1;
pub const DEFAULT_DT_CONTROL: f64 = 50e-6;
pub const DEFAULT_R_POWER_PER_M: f64 = 10e-6;
pub const DEFAULT_R_TRACTION_PER_M: f64 = 20e-6;

impl Scenario {
    /// A scenario with default settings; the layout extent spans the stations.
    pub fn new(stations: Vec<f64>, substations: Vec<SubstationParams>, trains: Vec<TrainSpec>) -> Self {
        let extent = span(stations.iter().chain(substations.iter().map(|s| &s.position)));
        let layout = TrackLayout {
            station_positions: stations,
            substation_positions: substations.iter().map(|s| s.position).collect(),
            r_power_per_m: DEFAULT_R_POWER_PER_M,
            r_traction_per_m: DEFAULT_R_TRACTION_PER_M,
            extent,
        };
        Self {
            mode: Mode::QuasiStatic,
            dt_network: DEFAULT_DT_NETWORK,
            dt_control: DEFAULT_DT_CONTROL,
            solver: SolverOptions::default(),
            layout,
            substations,
            trains,
            machine: MachineParams::default(),
            strict_accel_limits: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_owned(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Parses a scenario; relative profile paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Syntax {
            line: e.span().map_or(1, |r| text[..r.start].matches('\n').count() + 1),
            message: e.message().to_string(),
        })?;
        let mut trains = Vec::with_capacity(file.trains.len());
        for (k, t) in file.trains.into_iter().enumerate() {
            let profile = match (t.profile, t.points) {
                (Some(rel), None) => {
                    let path = base_dir.join(rel);
                    let text = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path, source })?;
                    parse_speed_profile(&text, t.unit)
                }
                (None, Some(points)) => {
                    let samples: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                    SpeedProfile::from_unit(&samples, t.unit)
                }
                _ => {
                    return Err(ScenarioError::Invalid(format!("train {k}: give exactly one of `profile` or `points`")))
                }
            }
            .map_err(|source| ScenarioError::Profile { train: k, source })?;
            trains.push(TrainSpec {
                vehicle: t.vehicle,
                profile,
                initial_position: t.initial_position,
                direction: t.direction,
                chopper: t.chopper,
            });
        }
        let mut scenario = Scenario::new(file.layout.stations, file.substations, trains);
        if let Some([lo, hi]) = file.layout.extent {
            scenario.layout.extent = (lo, hi);
        }
        scenario.layout.r_power_per_m = file.layout.r_power_per_m;
        scenario.layout.r_traction_per_m = file.layout.r_traction_per_m;
        scenario.mode = file.mode;
        scenario.dt_network = file.dt_network;
        scenario.dt_control = file.dt_control;
        scenario.solver = file.solver;
        scenario.machine = file.machine;
        scenario.strict_accel_limits = file.strict_accel_limits;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::Invalid(msg));
        if self.substations.is_empty() {
            return invalid("at least one substation is required".into());
        }
        if self.trains.is_empty() {
            return invalid("at least one train is required".into());
        }
        if !(self.dt_network > 0.0) {
            return invalid("dt_network must be > 0".into());
        }
        if self.mode == Mode::DriveLevel && !(self.dt_control > 0.0 && self.dt_control <= self.dt_network) {
            return invalid("drive_level needs 0 < dt_control <= dt_network".into());
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return invalid("solver needs tol > 0 and max_iter > 0".into());
        }
        let subs: Vec<f64> = self.substations.iter().map(|s| s.position).collect();
        if subs != self.layout.substation_positions {
            return invalid("layout substation positions do not match the substation list".into());
        }
        self.layout.validate().or_else(|e| invalid(e.to_string()))?;
        for (k, s) in self.substations.iter().enumerate() {
            s.validate().or_else(|e| invalid(format!("substation {k}: {e}")))?;
        }
        self.machine.validate().or_else(|e| invalid(e.to_string()))?;
        for (k, t) in self.trains.iter().enumerate() {
            t.vehicle.validate().or_else(|e| invalid(format!("train {k}: {e}")))?;
            t.chopper.validate().or_else(|e| invalid(format!("train {k}: {e}")))?;
            if !self.layout.contains(t.initial_position) {
                let (lo, hi) = self.layout.extent;
                return invalid(format!("train {k} starts at {} m, outside [{lo}, {hi}] m", t.initial_position));
            }
        }
        Ok(())
    }

    /// The run stops when the shortest profile ends.
    pub fn end_time(&self) -> f64 {
        self.trains.iter().map(|t| t.profile.end_time()).fold(f64::INFINITY, f64::min)
    }
}

fn span<'a>(xs: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    mode: Mode,
    #[serde(default = "dt_network_default")]
    dt_network: f64,
    #[serde(default = "dt_control_default")]
    dt_control: f64,
    #[serde(default)]
    strict_accel_limits: bool,
    #[serde(default)]
    solver: SolverOptions,
    layout: LayoutFile,
    #[serde(default)]
    machine: MachineParams,
    substations: Vec<SubstationParams>,
    trains: Vec<TrainFile>,
}

fn dt_network_default() -> f64 {
    DEFAULT_DT_NETWORK
}

fn dt_control_default() -> f64 {
    DEFAULT_DT_CONTROL
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    stations: Vec<f64>,
    extent: Option<[f64; 2]>,
    #[serde(default = "r_power_default")]
    r_power_per_m: f64,
    #[serde(default = "r_traction_default")]
    r_traction_per_m: f64,
}

fn r_power_default() -> f64 {
    DEFAULT_R_POWER_PER_M
}

fn r_traction_default() -> f64 {
    DEFAULT_R_TRACTION_PER_M
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    profile: Option<PathBuf>,
    points: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    unit: SpeedUnit,
    #[serde(default)]
    initial_position: f64,
    #[serde(default)]
    direction: Direction,
    #[serde(default)]
    vehicle: VehicleParams,
    #[serde(default)]
    chopper: ChopperSettings,
}
