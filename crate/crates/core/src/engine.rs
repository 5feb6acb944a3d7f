//! Time stepping: kinematics from the speed profiles, the backward vehicle and
//! gearbox model, optionally the simulated drives, and one load flow per track
//! and time point.
//!
//! The time grid is a uniform `dt_network` grid merged with every profile
//! breakpoint. Interior breakpoints appear twice, once with the left-hand slope and
//! once with the right-hand slope, so the step in tractive power lands on a
//! zero-length interval and trapezoidal energies stay exact on linear pieces.

use log::warn;
use thiserror::Error;

use crate::drive::{DriveError, DriveReference, TractionDrive, WaveformSample};
use crate::drivetrain::{motor_count, wheel_to_motor, MotorShaftPoint};
use crate::energy::{energy_report, phase_split, EnergyLedger, EnergyReport, Integration};
use crate::profile::{sample_speed, ProfileError, SpeedProfile};
use crate::rail::{build_graph, LayoutError};
use crate::scenario::{Mode, Scenario, ScenarioError};
use crate::solver::{solve, ChopperLimit, SolveResult, SolverError, TrainLoad};
use crate::substation::SubstationParams;
use crate::vehicle::{
    axle_torque_speed, check_accel_limits, tractive_effort, AxleOutput, ForceBreakdown, VehicleError, VehicleParams,
};

pub const TRACKS: usize = 2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("train {train}: {source}")]
    Vehicle { train: usize, source: VehicleError },
    #[error("train {train} at t = {t:.3} s: {source}")]
    Profile { train: usize, t: f64, source: ProfileError },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("t = {t:.3} s, track {track}: {source}")]
    Solver { t: f64, track: usize, source: SolverError },
    #[error("train {train}: {source}")]
    Drive { train: usize, source: DriveError },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainState {
    pub position: f64,
    pub speed: f64,
    pub accel: f64,
    pub forces: ForceBreakdown,
    pub axle: AxleOutput,
    pub motor: MotorShaftPoint,
    /// Power at all motor shafts, W.
    pub shaft_power: f64,
    /// DC-bus power, W (+ drawing).
    pub electrical_power: f64,
    /// Pantograph voltage, V.
    pub voltage: f64,
    /// DC-bus current `electrical_power / voltage`, A.
    pub current: f64,
    /// Current exchanged with the rail, including the chopper, A.
    pub line_current: f64,
    pub chopper_power: f64,
    pub cumulative_energy: f64,
    pub chopper_energy: f64,
}

/// One substation on one track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Busbar {
    pub track: usize,
    pub substation: usize,
    pub current: f64,
    pub voltage: f64,
    pub v0: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepRecord {
    pub time: f64,
    pub trains: Vec<TrainState>,
    /// Total current out of each substation over both tracks, A.
    pub substation_currents: Vec<f64>,
    /// Power delivered at each substation busbar, W.
    pub substation_powers: Vec<f64>,
    pub busbars: Vec<Busbar>,
    pub rail_loss_power: f64,
    pub chopper_power: f64,
    pub aux_power: f64,
    pub substation_energy: f64,
    pub rail_loss_energy: f64,
    pub chopper_energy: f64,
    /// Largest solver mismatch over the tracks, A.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub mode: Mode,
    pub records: Vec<StepRecord>,
    pub integration: Integration,
    pub report: EnergyReport,
    pub ledger: EnergyLedger,
    /// Per train, present only when requested in drive_level mode.
    pub waveforms: Vec<Vec<WaveformSample>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Record the drive waveform every this many control steps (drive_level).
    pub waveform_every: Option<usize>,
}

/// Backward model evaluated at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct MechPoint {
    speed: f64,
    accel: f64,
    forces: ForceBreakdown,
    axle: AxleOutput,
    motor: MotorShaftPoint,
    /// All motors together, W.
    shaft_power: f64,
    /// Gearbox loss of all axles, W.
    gear_loss: f64,
}

fn mech_point(profile: &SpeedProfile, p: &VehicleParams, t: f64, left: bool) -> Result<MechPoint, ProfileError> {
    let speed = sample_speed(profile, t)?;
    let accel = profile.slope_at(t, left)?;
    let forces = tractive_effort(accel, speed, p);
    let axle = axle_torque_speed(forces.tractive, speed, p);
    let motor = wheel_to_motor(axle.torque, axle.speed, p);
    let n = f64::from(motor_count(p));
    Ok(MechPoint {
        speed,
        accel,
        forces,
        axle,
        motor,
        shaft_power: n * motor.torque * motor.speed,
        gear_loss: n * motor.loss_torque * axle.speed,
    })
}

/// Electrical power for a shaft power when drive losses are lumped into an
/// efficiency.
fn lumped_electrical(shaft: f64, eta: f64) -> f64 {
    if shaft >= 0.0 {
        shaft / eta
    } else {
        shaft * eta
    }
}

/// Time points with a flag telling whether the left-hand slope applies.
pub fn time_grid(scenario: &Scenario) -> Vec<(f64, bool)> {
    let end = scenario.end_time();
    if !(end > 0.0) {
        return if end == 0.0 { vec![(0.0, false)] } else { Vec::new() };
    }
    let n = (end / scenario.dt_network).round().max(1.0) as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| (k as f64 * scenario.dt_network).min(end)).collect();
    times.push(end);
    let mut breaks: Vec<f64> = Vec::new();
    for t in scenario.trains.iter().flat_map(|tr| tr.profile.breakpoints()) {
        if t > 0.0 && t < end {
            breaks.push(t);
        }
    }
    times.extend(&breaks);
    times.sort_by(f64::total_cmp);
    // uniform points that land within rounding distance of a breakpoint snap to it
    let eps = 1e-9 * scenario.dt_network;
    times.dedup_by(|a, b| (*a - *b).abs() <= eps);
    breaks.sort_by(f64::total_cmp);
    let mut grid = Vec::with_capacity(times.len() + breaks.len());
    for t in times {
        let at_break = breaks.iter().any(|b| (b - t).abs() <= eps);
        if at_break {
            grid.push((t, true));
            grid.push((t, false));
        } else {
            grid.push((t, t >= end));
        }
    }
    grid
}

#[cfg(feature = "parallel")]
fn advance_drives<F>(drives: &mut [TractionDrive], f: F) -> Result<Vec<f64>, SimError>
where
    F: Fn(usize, &mut TractionDrive) -> Result<f64, SimError> + Sync + Send,
{
    use rayon::prelude::*;
    drives.par_iter_mut().enumerate().map(|(k, d)| f(k, d)).collect()
}

#[cfg(not(feature = "parallel"))]
fn advance_drives<F>(drives: &mut [TractionDrive], f: F) -> Result<Vec<f64>, SimError>
where
    F: Fn(usize, &mut TractionDrive) -> Result<f64, SimError>,
{
    drives.iter_mut().enumerate().map(|(k, d)| f(k, d)).collect()
}

pub fn run(scenario: &Scenario) -> Result<RunResult, SimError> {
    run_with(scenario, &RunOptions::default())
}

pub fn run_with(scenario: &Scenario, opts: &RunOptions) -> Result<RunResult, SimError> {
    scenario.validate()?;
    for (train, t) in scenario.trains.iter().enumerate() {
        if let Err(e) = check_accel_limits(&t.profile, &t.vehicle) {
            if scenario.strict_accel_limits {
                return Err(SimError::Vehicle { train, source: e });
            }
            warn!("train {train}: {e}");
        }
    }
    let grid = time_grid(scenario);
    let n_trains = scenario.trains.len();
    let n_subs = scenario.substations.len();
    let drive_level = scenario.mode == Mode::DriveLevel;
    let rule = if drive_level { Integration::RightRectangle } else { Integration::Trapezoid };
    let motors: Vec<f64> = scenario.trains.iter().map(|t| f64::from(motor_count(&t.vehicle))).collect();

    // one copy of every substation per track; auxiliary load is carried by track 0
    let track_subs: Vec<Vec<SubstationParams>> = (0..TRACKS)
        .map(|k| {
            scenario
                .substations
                .iter()
                .map(|s| SubstationParams { aux_load: if k == 0 { s.aux_load } else { 0.0 }, ..s.clone() })
                .collect()
        })
        .collect();
    let loads_template: Vec<ChopperLimit> = scenario
        .trains
        .iter()
        .map(|t| ChopperLimit {
            v_act: t.chopper.v_act,
            conductance: f64::from(motor_count(&t.vehicle)) / t.vehicle.chopper_resistance,
        })
        .collect();

    let mut drives: Vec<TractionDrive> = Vec::new();
    if drive_level {
        for (k, t) in scenario.trains.iter().enumerate() {
            let m = mech_point(&t.profile, &t.vehicle, 0.0, false).map_err(|source| SimError::Profile {
                train: k,
                t: 0.0,
                source,
            })?;
            let v = &t.vehicle;
            let referred = v.total_mass() * v.wheel_radius.powi(2) / (f64::from(motor_count(v)) * v.gear_ratio.powi(2));
            let mut d =
                TractionDrive::new(scenario.machine.clone(), v.clone(), referred, m.motor.speed, m.motor.torque)
                    .map_err(|source| SimError::Drive { train: k, source })?;
            if let Some(every) = opts.waveform_every {
                d.record_waveform(every);
            }
            drives.push(d);
        }
    }

    let mut records: Vec<StepRecord> = Vec::with_capacity(grid.len());
    let mut ledger = EnergyLedger::default();
    let mut prev_mech: Vec<MechPoint> = Vec::new();
    let mut drive_power: Vec<f64> = Vec::new();

    for (step, &(t, left)) in grid.iter().enumerate() {
        let mut mech = Vec::with_capacity(n_trains);
        let mut positions = Vec::with_capacity(n_trains);
        for (k, tr) in scenario.trains.iter().enumerate() {
            let perr = |source| SimError::Profile { train: k, t, source };
            mech.push(mech_point(&tr.profile, &tr.vehicle, t, left).map_err(perr)?);
            positions.push(tr.initial_position + tr.direction.sign() * tr.profile.distance_to(t).map_err(perr)?);
        }

        // electrical power of each train at this time point
        let power: Vec<f64> = if drive_level {
            if step == 0 {
                mech.iter().map(|m| m.shaft_power).collect()
            } else {
                let (t_prev, _) = grid[step - 1];
                if t > t_prev {
                    let volts: Vec<f64> =
                        records.last().map(|r| r.trains.iter().map(|s| s.voltage).collect()).unwrap_or_default();
                    let dt_control = scenario.dt_control;
                    let per_motor = advance_drives(&mut drives, |k, d| {
                        let tr = &scenario.trains[k];
                        let reference = |tm: f64| {
                            let m = mech_point(&tr.profile, &tr.vehicle, tm, false)
                                .expect("control steps stay inside the profile range");
                            let v = &tr.vehicle;
                            DriveReference {
                                omega: m.motor.speed,
                                alpha: m.accel * v.gear_ratio / v.wheel_radius,
                                torque: m.motor.torque,
                            }
                        };
                        d.advance(t, dt_control, volts[k], reference)
                            .map(|s| s.mean_power)
                            .map_err(|source| SimError::Drive { train: k, source })
                    })?;
                    drive_power = per_motor.iter().zip(&motors).map(|(p, n)| p * n).collect();
                }
                drive_power.clone()
            }
        } else {
            mech.iter()
                .zip(&scenario.trains)
                .map(|(m, tr)| lumped_electrical(m.shaft_power, tr.vehicle.drive_efficiency))
                .collect()
        };

        // one load flow per track
        let mut voltages = vec![0.0; n_trains];
        let mut line_currents = vec![0.0; n_trains];
        let mut chopper = vec![0.0; n_trains];
        let mut sub_currents = vec![0.0; n_subs];
        let mut sub_powers = vec![0.0; n_subs];
        let mut busbars = Vec::new();
        let mut rail_loss = 0.0;
        let mut residual: f64 = 0.0;
        for (track, subs) in track_subs.iter().enumerate() {
            let members: Vec<usize> =
                (0..n_trains).filter(|&k| scenario.trains[k].direction.track() == track).collect();
            let has_aux = subs.iter().any(|s| s.aux_load > 0.0);
            if members.is_empty() && !has_aux {
                continue;
            }
            let pos: Vec<f64> = members.iter().map(|&k| positions[k]).collect();
            let graph = build_graph(&scenario.layout, &pos, t).map_err(|e| match e {
                LayoutError::Placement { train, position, min, max, t } => {
                    LayoutError::Placement { train: members[train], position, min, max, t }
                }
                other => other,
            })?;
            let loads: Vec<TrainLoad> =
                members.iter().map(|&k| TrainLoad { power: power[k], chopper: loads_template[k] }).collect();
            let sol: SolveResult = solve(&graph, &loads, subs, &scenario.solver).map_err(|e| SimError::Solver {
                t,
                track,
                source: match e {
                    SolverError::Infeasible { train } => SolverError::Infeasible { train: members[train] },
                    other => other,
                },
            })?;
            for (local, &k) in members.iter().enumerate() {
                voltages[k] = sol.train_voltages[local];
                line_currents[k] = sol.train_currents[local];
                chopper[k] = sol.chopper_powers[local];
            }
            for (s, (&i, &v)) in sol.substation_currents.iter().zip(&sol.substation_voltages).enumerate() {
                sub_currents[s] += i;
                sub_powers[s] += i * v;
                busbars.push(Busbar { track, substation: s, current: i, voltage: v, v0: subs[s].v0 });
            }
            rail_loss += sol.rail_loss;
            residual = residual.max(sol.residual);
        }

        let aux_power: f64 = scenario.substations.iter().map(|s| s.aux_load).sum();
        let chopper_total: f64 = chopper.iter().sum();
        let sub_total: f64 = sub_powers.iter().sum();
        let mut rec = StepRecord {
            time: t,
            trains: Vec::with_capacity(n_trains),
            substation_currents: sub_currents,
            substation_powers: sub_powers,
            busbars,
            rail_loss_power: rail_loss,
            chopper_power: chopper_total,
            aux_power,
            residual,
            ..Default::default()
        };
        let prev = records.last();
        let dt = prev.map_or(0.0, |p| t - p.time);
        for k in 0..n_trains {
            let m = &mech[k];
            let (cum, chop_cum) = prev.map_or((0.0, 0.0), |p| {
                let s = &p.trains[k];
                (
                    s.cumulative_energy + rule.step(s.electrical_power, power[k], dt),
                    s.chopper_energy + rule.step(s.chopper_power, chopper[k], dt),
                )
            });
            rec.trains.push(TrainState {
                position: positions[k],
                speed: m.speed,
                accel: m.accel,
                forces: m.forces,
                axle: m.axle,
                motor: m.motor,
                shaft_power: m.shaft_power,
                electrical_power: power[k],
                voltage: voltages[k],
                current: power[k] / voltages[k],
                line_current: line_currents[k],
                chopper_power: chopper[k],
                cumulative_energy: cum,
                chopper_energy: chop_cum,
            });
        }
        if let Some(p) = prev {
            rec.substation_energy = p.substation_energy + rule.step(p.substation_powers.iter().sum(), sub_total, dt);
            rec.rail_loss_energy = p.rail_loss_energy + rule.step(p.rail_loss_power, rail_loss, dt);
            rec.chopper_energy = p.chopper_energy + rule.step(p.chopper_power, chopper_total, dt);
            ledger.aux += rule.step(p.aux_power, aux_power, dt);
            for k in 0..n_trains {
                let (a, b) = (&prev_mech[k], &mech[k]);
                let trap = |x: f64, y: f64| 0.5 * (x + y) * dt;
                ledger.friction += trap(a.forces.rolling * a.speed, b.forces.rolling * b.speed);
                ledger.aero += trap(a.forces.aero * a.speed, b.forces.aero * b.speed);
                ledger.grade += trap(a.forces.grade * a.speed, b.forces.grade * b.speed);
                ledger.gearbox += trap(a.gear_loss, b.gear_loss);
                if !drive_level {
                    let s = &p.trains[k];
                    ledger.drive += rule.step(s.electrical_power - a.shaft_power, power[k] - b.shaft_power, dt);
                }
            }
        }
        prev_mech = mech;
        records.push(rec);
    }

    let last = records.last().cloned().unwrap_or_default();
    ledger.substation = last.substation_energy;
    ledger.rail = last.rail_loss_energy;
    ledger.chopper = last.chopper_energy;
    for (k, tr) in scenario.trains.iter().enumerate() {
        if let (Some(first), Some(end)) = (records.first(), records.last()) {
            let m = tr.vehicle.total_mass();
            ledger.kinetic += 0.5 * m * (end.trains[k].speed.powi(2) - first.trains[k].speed.powi(2));
        }
    }
    if drive_level {
        ledger.drive = drives.iter().zip(&motors).map(|(d, n)| n * d.totals().losses()).sum();
    }

    let phases: Vec<_> = scenario.trains.iter().map(|t| phase_split(&t.profile)).collect();
    let traces: Vec<Vec<(f64, f64, f64)>> = (0..n_trains)
        .map(|k| records.iter().map(|r| (r.time, r.trains[k].electrical_power, r.trains[k].chopper_power)).collect())
        .collect();
    let sub_traces: Vec<Vec<(f64, f64)>> =
        (0..n_subs).map(|s| records.iter().map(|r| (r.time, r.substation_powers[s])).collect()).collect();
    let rail_trace: Vec<(f64, f64)> = records.iter().map(|r| (r.time, r.rail_loss_power)).collect();
    let report = energy_report(&traces, &phases, &sub_traces, &rail_trace, rule);
    let waveforms = drives.iter().map(|d| d.waveform().to_vec()).filter(|w| !w.is_empty()).collect();

    Ok(RunResult { mode: scenario.mode, records, integration: rule, report, ledger, waveforms })
}
