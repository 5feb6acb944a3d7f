//! One representative motor with its DTC inverter and speed loop, stepped at the
//! control rate between network solves.

use std::fmt::Write as _;

use super::dtc::{dtc_select_vector, estimate_flux_torque, DtcBands, DtcState};
use super::machine::{machine_step, GateVector, MachineParams, MachineState};
use super::speed::{field_weakening_flux, limited_step, pull_out_torque, SpeedCtrlState, PULL_OUT_MARGIN};
use super::DriveError;
use crate::vehicle::VehicleParams;

/// DC-link current drawn by the inverter for stator voltage `v_s` and current
/// `i_s` (lossless inverter), A.
pub fn dc_bus_current(v_s: [f64; 2], i_s: [f64; 2], v_dc: f64) -> f64 {
    1.5 * (v_s[0] * i_s[0] + v_s[1] * i_s[1]) / v_dc
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WaveformSample {
    pub time: f64,
    pub t_ref: f64,
    pub torque: f64,
    pub flux: f64,
    pub i_alpha: f64,
    pub i_beta: f64,
    pub v_dc: f64,
    pub omega_m: f64,
}

/// Energy accumulated by one motor since construction, J.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriveTotals {
    pub electrical: f64,
    pub copper: f64,
    pub magnetic_delta: f64,
    /// Change of kinetic energy of everything on the shaft (rotor plus the share
    /// of the train referred to it), at the actual speed.
    pub kinetic_delta: f64,
    /// Kinetic energy the referred train inertia would gain at the reference speed.
    pub reference_kinetic: f64,
    /// Integral of `T_load * (omega_m - omega_ref)`: work done against the load
    /// beyond what the reference speed needs.
    pub tracking: f64,
}

impl DriveTotals {
    /// Electrical input not delivered to the shaft at the reference operating point.
    pub fn losses(&self) -> f64 {
        self.copper + self.magnetic_delta + self.kinetic_delta - self.reference_kinetic + self.tracking
    }
}

/// What the vehicle asks of one motor at an instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriveReference {
    /// Shaft speed, rad/s.
    pub omega: f64,
    /// Shaft acceleration, rad/s^2.
    pub alpha: f64,
    /// Shaft torque of the backward vehicle model, N*m.
    pub torque: f64,
}

/// Result of advancing over one network interval.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntervalSummary {
    /// Electrical energy drawn by one motor, J.
    pub electrical: f64,
    /// Mean electrical power of one motor, W.
    pub mean_power: f64,
    pub omega_m: f64,
}

#[derive(Debug, Clone)]
pub struct TractionDrive {
    machine_params: MachineParams,
    bands: DtcBands,
    vehicle: VehicleParams,
    /// Train inertia referred to this motor's shaft, kg*m^2.
    load_inertia: f64,
    machine: MachineState,
    dtc: DtcState,
    speed: SpeedCtrlState,
    applied: [f64; 2],
    time: f64,
    totals: DriveTotals,
    waveform: Option<(usize, Vec<WaveformSample>)>,
    step_count: usize,
}

impl TractionDrive {
    /// Drive already magnetised at rated flux and spinning at `omega_ref`, with
    /// `shaft_torque` as the initial torque reference.
    ///
    /// `load_inertia` is the share of the train mass seen at this shaft. It is
    /// simulated as extra rotor inertia, and only the remainder of the vehicle
    /// torque (resistances and gear losses) is applied as a prescribed load, so a
    /// torque shortfall makes the train lag rather than the rotor run away.
    pub fn new(
        machine_params: MachineParams,
        vehicle: VehicleParams,
        load_inertia: f64,
        omega_ref: f64,
        shaft_torque: f64,
    ) -> Result<Self, DriveError> {
        machine_params.validate()?;
        if !(load_inertia >= 0.0 && load_inertia.is_finite()) {
            return Err(DriveError::InvalidParam("load inertia must be finite and >= 0"));
        }
        let machine_params = MachineParams { inertia: machine_params.inertia + load_inertia, ..machine_params };
        let machine = MachineState::magnetised(&machine_params, machine_params.rated_flux, omega_ref);
        let dtc = DtcState::with_flux(machine.psi_s[0], machine.psi_s[1]);
        let speed = SpeedCtrlState { t_ref: shaft_torque, ..SpeedCtrlState::new(machine_params.rated_flux) };
        Ok(Self {
            bands: DtcBands::for_machine(&machine_params),
            machine_params,
            vehicle,
            load_inertia,
            machine,
            dtc,
            speed,
            applied: [0.0; 2],
            time: 0.0,
            totals: DriveTotals::default(),
            waveform: None,
            step_count: 0,
        })
    }

    pub fn with_start_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    /// Records every `every`-th control step.
    pub fn record_waveform(&mut self, every: usize) {
        self.waveform = Some((every.max(1), Vec::new()));
    }

    pub fn waveform(&self) -> &[WaveformSample] {
        self.waveform.as_ref().map_or(&[], |w| &w.1)
    }

    pub fn totals(&self) -> DriveTotals {
        self.totals
    }

    pub fn dtc(&self) -> &DtcState {
        &self.dtc
    }

    pub fn machine(&self) -> &MachineState {
        &self.machine
    }

    pub fn machine_params(&self) -> &MachineParams {
        &self.machine_params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// One control period: estimator, speed loop, DTC, then the machine.
    /// Returns the electrical energy of the step.
    pub fn step(&mut self, dt: f64, v_dc: f64, r: DriveReference) -> Result<f64, DriveError> {
        let omega_ref = r.omega;
        let m = &self.machine_params;
        let i_s = self.machine.outputs(m).i_s;
        let (dtc, t_est) = estimate_flux_torque(self.applied, i_s, dt, &self.dtc, m);
        let omega_e = f64::from(m.pole_pairs) * self.machine.omega_m;
        let psi_ref = field_weakening_flux(m.rated_flux, v_dc, omega_e);
        // never ask for more than the machine can hold at this flux
        let cap = PULL_OUT_MARGIN * pull_out_torque(psi_ref, m);
        let (lo, hi) = self.vehicle.torque_limit;
        let (lo, hi) = (lo.max(-cap), hi.min(cap));
        // the known load feeds forward; the PI only trims the residual speed error
        let rotor_inertia = m.inertia - self.load_inertia;
        let ff = (r.torque + rotor_inertia * r.alpha).clamp(lo, hi);
        self.speed = limited_step(omega_ref, self.machine.omega_m, dt, &self.speed, &self.vehicle, (lo - ff, hi - ff));
        self.speed.t_ref += ff;
        self.speed.psi_ref = psi_ref;
        let (dtc, gate) = dtc_select_vector(self.speed.t_ref, t_est, psi_ref, &dtc, &self.bands);
        self.dtc = dtc;
        let load = r.torque - self.load_inertia * r.alpha;
        self.totals.reference_kinetic += self.load_inertia * r.alpha * omega_ref * dt;
        self.apply(gate, dt, v_dc, omega_ref, load)
    }

    /// Torque-mode step: the speed loop is bypassed and `t_ref` fed straight to
    /// DTC at constant flux reference.
    pub fn step_torque(&mut self, dt: f64, v_dc: f64, t_ref: f64, load_torque: f64) -> Result<f64, DriveError> {
        let m = &self.machine_params;
        let i_s = self.machine.outputs(m).i_s;
        let (dtc, t_est) = estimate_flux_torque(self.applied, i_s, dt, &self.dtc, m);
        self.speed.t_ref = t_ref;
        self.speed.psi_ref = m.rated_flux;
        let (dtc, gate) = dtc_select_vector(t_ref, t_est, m.rated_flux, &dtc, &self.bands);
        self.dtc = dtc;
        let omega = self.machine.omega_m;
        self.apply(gate, dt, v_dc, omega, load_torque)
    }

    fn apply(
        &mut self,
        gate: GateVector,
        dt: f64,
        v_dc: f64,
        omega_ref: f64,
        load_torque: f64,
    ) -> Result<f64, DriveError> {
        let m = &self.machine_params;
        let before = self.machine;
        let (next, e) = machine_step(gate, v_dc, load_torque, dt, &before, m).map_err(|err| match err {
            DriveError::NonFinite => DriveError::Diverged { time: self.time },
            other => other,
        })?;
        self.applied = gate.voltage(v_dc);
        self.machine = next;
        self.time += dt;
        let ke = |w: f64| 0.5 * m.inertia * w * w;
        self.totals.electrical += e.electrical;
        self.totals.copper += e.copper;
        self.totals.magnetic_delta += e.magnetic_delta;
        self.totals.kinetic_delta += ke(next.omega_m) - ke(before.omega_m);
        self.totals.tracking += load_torque * (0.5 * (before.omega_m + next.omega_m) - omega_ref) * dt;
        self.step_count += 1;
        if let Some((every, samples)) = self.waveform.as_mut() {
            if self.step_count.is_multiple_of(*every) {
                let o = next.outputs(m);
                samples.push(WaveformSample {
                    time: self.time,
                    t_ref: self.speed.t_ref,
                    torque: o.torque,
                    flux: next.stator_flux(),
                    i_alpha: o.i_s[0],
                    i_beta: o.i_s[1],
                    v_dc,
                    omega_m: next.omega_m,
                });
            }
        }
        Ok(e.electrical)
    }

    /// Steps from the current time to `t_end` with steps no longer than `dt`,
    /// holding `v_dc`. `reference` is sampled at the midpoint of each step.
    pub fn advance<F>(&mut self, t_end: f64, dt: f64, v_dc: f64, reference: F) -> Result<IntervalSummary, DriveError>
    where
        F: Fn(f64) -> DriveReference,
    {
        let t0 = self.time;
        let span = t_end - t0;
        if span <= 0.0 {
            return Ok(IntervalSummary { omega_m: self.machine.omega_m, ..Default::default() });
        }
        let n = (span / dt).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let mut electrical = 0.0;
        for k in 0..n {
            let mid = t0 + (k as f64 + 0.5) * h;
            electrical += self.step(h, v_dc, reference(mid))?;
        }
        self.time = t_end;
        Ok(IntervalSummary { electrical, mean_power: electrical / span, omega_m: self.machine.omega_m })
    }
}

/// Torque-step test rig: a machine pre-magnetised at rated flux is held at
/// `omega_m` by a stiff dynamometer and driven in torque mode for `duration`.
pub fn run_torque_step(
    machine_params: MachineParams,
    t_ref: f64,
    omega_m: f64,
    v_dc: f64,
    dt: f64,
    duration: f64,
) -> Result<Vec<WaveformSample>, DriveError> {
    machine_params.validate()?;
    let rig = MachineParams { inertia: DYNAMOMETER_INERTIA, ..machine_params };
    let mut drive = TractionDrive::new(rig, VehicleParams::default(), 0.0, omega_m, 0.0)?;
    drive.record_waveform(1);
    let n = (duration / dt).round() as usize;
    for _ in 0..n {
        drive.step_torque(dt, v_dc, t_ref, t_ref)?;
    }
    Ok(drive.waveform.map(|w| w.1).unwrap_or_default())
}

const DYNAMOMETER_INERTIA: f64 = 1e12;

/// Waveform in the same comma-separated layout as speed profiles.
pub fn emit_waveform(samples: &[WaveformSample]) -> String {
    let mut out = String::from("time_s,t_ref_Nm,torque_Nm,flux_Wb,i_alpha_A,i_beta_A,v_dc_V,omega_m_radps\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.time, s.t_ref, s.torque, s.flux, s.i_alpha, s.i_beta, s.v_dc, s.omega_m
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dc_current_balances_ac_power() {
        let i = dc_bus_current([400.0, 0.0], [100.0, 50.0], 600.0);
        assert_relative_eq!(i * 600.0, 1.5 * 400.0 * 100.0, max_relative = 1e-12);
    }

    fn steady(omega: f64, torque: f64) -> impl Fn(f64) -> DriveReference {
        move |_| DriveReference { omega, alpha: 0.0, torque }
    }

    #[test]
    fn holds_constant_speed_under_load() {
        let m = MachineParams::default();
        let mut d = TractionDrive::new(m, VehicleParams::default(), 0.0, 100.0, 300.0).unwrap();
        let s = d.advance(0.3, 20e-6, 650.0, steady(100.0, 300.0)).unwrap();
        assert!((s.omega_m - 100.0).abs() < 1.0, "{s:?}");
        // motoring: mean power at least the shaft power
        assert!(s.mean_power > 300.0 * 100.0 * 0.95, "{s:?}");
        let t = d.totals();
        assert_relative_eq!(t.electrical, s.electrical, max_relative = 1e-9);
        // electrical input = losses + load work at the reference speed
        let load_work = 300.0 * 100.0 * 0.3;
        assert_relative_eq!(t.electrical, t.losses() + load_work, max_relative = 0.02);
    }

    #[test]
    fn regenerates_under_negative_load() {
        let m = MachineParams::default();
        let mut d = TractionDrive::new(m, VehicleParams::default(), 0.0, 100.0, -300.0).unwrap();
        let s = d.advance(0.2, 20e-6, 650.0, steady(100.0, -300.0)).unwrap();
        assert!(s.mean_power < 0.0, "{s:?}");
    }

    #[test]
    fn torque_step_tracks_and_holds_flux() {
        let m = MachineParams::default();
        let w = run_torque_step(m.clone(), 500.0, 100.0, 650.0, 2e-6, 0.2).unwrap();
        let tail = &w[w.len() / 5..];
        let mean_err = tail.iter().map(|s| (s.torque - 500.0).abs()).sum::<f64>() / tail.len() as f64;
        assert!(mean_err <= 0.05 * m.rated_torque + 0.05 * m.rated_torque, "{mean_err}");
        let settled: Vec<_> = w.iter().filter(|s| s.time > 0.05).collect();
        let inside = settled.iter().filter(|s| (s.flux - m.rated_flux).abs() <= 0.02 * m.rated_flux).count();
        assert!(inside as f64 >= 0.95 * settled.len() as f64, "{inside}/{}", settled.len());
    }

    #[test]
    fn referred_inertia_follows_a_ramp_and_balances() {
        let m = MachineParams::default();
        let j = 40.0;
        let alpha = 8.0;
        let torque = |t: f64| j * alpha + 50.0 + 0.0 * t;
        let mut d = TractionDrive::new(m, VehicleParams::default(), j, 20.0, torque(0.0)).unwrap();
        let reference = |t: f64| DriveReference { omega: 20.0 + alpha * t, alpha, torque: torque(t) };
        let s = d.advance(1.0, 50e-6, 650.0, reference).unwrap();
        assert!((s.omega_m - 28.0).abs() < 1.0, "{s:?}");
        // electrical input = losses + reference shaft work
        let shaft: f64 = torque(0.0) * 0.5 * (20.0 + 28.0);
        let t = d.totals();
        assert_relative_eq!(t.electrical, t.losses() + shaft, max_relative = 1e-3);
    }

    #[test]
    fn torque_shortfall_lags_instead_of_running_away() {
        let m = MachineParams::default();
        let j = 40.0;
        // a braking demand far beyond the machine at this speed
        let reference = |t: f64| DriveReference { omega: 250.0 - 30.0 * t, alpha: -30.0, torque: -1200.0 + 20.0 };
        let mut d = TractionDrive::new(m, VehicleParams::default(), j, 250.0, -1200.0).unwrap();
        let s = d.advance(0.5, 50e-6, 650.0, reference).unwrap();
        assert!(s.omega_m <= 250.0 + 1.0, "{s:?}");
    }

    #[test]
    fn waveform_dump_has_header_and_rows() {
        let mut d = TractionDrive::new(MachineParams::default(), VehicleParams::default(), 0.0, 10.0, 0.0).unwrap();
        d.record_waveform(10);
        d.advance(0.01, 20e-6, 650.0, steady(10.0, 0.0)).unwrap();
        let text = emit_waveform(d.waveform());
        assert_eq!(text.lines().count(), 1 + 50);
        assert!(text.starts_with("time_s,"));
    }
}
