//! Phase bookkeeping and the energy report of a completed run.

use crate::profile::SpeedProfile;

pub const J_PER_KWH: f64 = 3.6e6;

pub fn kwh(joules: f64) -> f64 {
    joules / J_PER_KWH
}

/// Slopes smaller than this are treated as cruising, m/s^2.
const FLAT_SLOPE: f64 = 1e-12;

/// Time intervals of a profile grouped by the sign of its slope. Adjacent
/// segments of the same sign are merged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Phases {
    pub accel: Vec<(f64, f64)>,
    pub decel: Vec<(f64, f64)>,
    pub cruise: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Accel,
    Decel,
    Cruise,
}

impl Phases {
    /// Phase containing `t`; interior boundaries belong to the later interval.
    pub fn phase_at(&self, t: f64) -> Option<Phase> {
        let hit = |v: &[(f64, f64)]| v.iter().any(|&(a, b)| t >= a && t < b);
        if hit(&self.accel) {
            Some(Phase::Accel)
        } else if hit(&self.decel) {
            Some(Phase::Decel)
        } else if hit(&self.cruise) {
            Some(Phase::Cruise)
        } else {
            None
        }
    }
}

pub fn phase_split(profile: &SpeedProfile) -> Phases {
    let mut phases = Phases::default();
    let mut current: Option<(Phase, f64, f64)> = None;
    for (t0, t1, slope) in profile.segments() {
        let kind = if slope > FLAT_SLOPE {
            Phase::Accel
        } else if slope < -FLAT_SLOPE {
            Phase::Decel
        } else {
            Phase::Cruise
        };
        current = match current {
            Some((k, a, _)) if k == kind => Some((k, a, t1)),
            Some(done) => {
                push(&mut phases, done);
                Some((kind, t0, t1))
            }
            None => Some((kind, t0, t1)),
        };
    }
    if let Some(done) = current {
        push(&mut phases, done);
    }
    phases
}

fn push(phases: &mut Phases, (kind, a, b): (Phase, f64, f64)) {
    match kind {
        Phase::Accel => phases.accel.push((a, b)),
        Phase::Decel => phases.decel.push((a, b)),
        Phase::Cruise => phases.cruise.push((a, b)),
    }
}

/// How a sampled power trace is turned into energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integration {
    Trapezoid,
    /// Each sample carries the mean power of the interval that ends at it.
    RightRectangle,
}

impl Integration {
    pub fn step(self, p0: f64, p1: f64, dt: f64) -> f64 {
        match self {
            Integration::Trapezoid => 0.5 * (p0 + p1) * dt,
            Integration::RightRectangle => p1 * dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainEnergy {
    /// Electrical energy drawn during acceleration phases, J.
    pub accel_energy: f64,
    /// Electrical energy returned during deceleration phases, J (positive).
    pub decel_energy: f64,
    /// `decel / accel`, absent when nothing was drawn while accelerating.
    pub regen_ratio: Option<f64>,
    pub chopper_energy: f64,
    /// Net electrical energy over the whole run, J.
    pub net_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyReport {
    pub trains: Vec<TrainEnergy>,
    /// Energy delivered at each substation busbar, J.
    pub substations: Vec<f64>,
    pub rail_loss: f64,
    pub chopper_energy: f64,
    pub accel_energy: f64,
    pub decel_energy: f64,
    pub regen_ratio: Option<f64>,
}

impl EnergyReport {
    pub fn substation_energy(&self) -> f64 {
        self.substations.iter().sum()
    }
}

fn ratio(decel: f64, accel: f64) -> Option<f64> {
    (accel > 0.0).then(|| decel / accel)
}

/// Integrates each train's `(time, electrical W, chopper W)` trace by phase. `substation_powers[k]` and
/// `rail_loss` are `(time, power)` traces on the same grid.
pub fn energy_report(
    trains: &[Vec<(f64, f64, f64)>],
    phases: &[Phases],
    substation_powers: &[Vec<(f64, f64)>],
    rail_loss: &[(f64, f64)],
    rule: Integration,
) -> EnergyReport {
    let mut report = EnergyReport::default();
    for (trace, ph) in trains.iter().zip(phases) {
        let mut e = TrainEnergy::default();
        for w in trace.windows(2) {
            let (t0, p0, c0) = w[0];
            let (t1, p1, c1) = w[1];
            let dt = t1 - t0;
            if dt <= 0.0 {
                continue;
            }
            e.net_energy += rule.step(p0, p1, dt);
            e.chopper_energy += rule.step(c0, c1, dt);
            match ph.phase_at(0.5 * (t0 + t1)) {
                Some(Phase::Accel) => e.accel_energy += rule.step(p0, p1, dt),
                Some(Phase::Decel) => e.decel_energy -= rule.step(p0.min(0.0), p1.min(0.0), dt),
                _ => {}
            }
        }
        e.regen_ratio = ratio(e.decel_energy, e.accel_energy);
        report.accel_energy += e.accel_energy;
        report.decel_energy += e.decel_energy;
        report.chopper_energy += e.chopper_energy;
        report.trains.push(e);
    }
    report.regen_ratio = ratio(report.decel_energy, report.accel_energy);
    report.substations = substation_powers.iter().map(|trace| integrate(trace, rule)).collect();
    report.rail_loss = integrate(rail_loss, rule);
    report
}

pub fn integrate(trace: &[(f64, f64)], rule: Integration) -> f64 {
    trace.windows(2).map(|w| rule.step(w[0].1, w[1].1, w[1].0 - w[0].0)).sum()
}

/// Global energy balance of a run, J. Supply on one side, every sink on the other.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    pub substation: f64,
    pub kinetic: f64,
    pub friction: f64,
    pub aero: f64,
    pub grade: f64,
    pub gearbox: f64,
    /// Losses between the motor shaft and the DC bus.
    pub drive: f64,
    pub rail: f64,
    pub chopper: f64,
    pub aux: f64,
}

impl EnergyLedger {
    pub fn sinks(&self) -> f64 {
        self.kinetic
            + self.friction
            + self.aero
            + self.grade
            + self.gearbox
            + self.drive
            + self.rail
            + self.chopper
            + self.aux
    }

    pub fn residual(&self) -> f64 {
        self.substation - self.sinks()
    }

    /// Residual relative to the substation energy (or to the largest flow when
    /// the substations delivered next to nothing).
    pub fn relative_residual(&self) -> f64 {
        let flows = [self.substation, self.kinetic, self.friction, self.aero, self.gearbox, self.rail, self.chopper];
        let scale = if self.substation.abs() > 1e-9 {
            self.substation.abs()
        } else {
            flows.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE)
        };
        self.residual().abs() / scale
    }
}
