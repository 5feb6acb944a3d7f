//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use rbsim_core::drive::{chopper_step, run_torque_step, ChopperSettings, ChopperState, DtcBands, MachineParams};
use rbsim_core::drivetrain::wheel_to_motor;
use rbsim_core::energy::kwh;
use rbsim_core::rail::{build_graph, NetworkGraph, Node, TrackLayout};
use rbsim_core::solver::{solve, ChopperLimit, SolverOptions, TrainLoad};
use rbsim_core::substation::SubstationParams;
use rbsim_core::vehicle::VehicleParams;
use rbsim_core::{run, RunResult, Scenario};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> Scenario {
    Scenario::load(&scenario_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn shipped() -> Vec<(String, Scenario)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .expect("scenario directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let s = Scenario::load(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, s)
        })
        .collect()
}

fn peak_braking_current(r: &RunResult) -> f64 {
    r.records.iter().flat_map(|x| x.trains.iter()).map(|t| -t.current).fold(0.0, f64::max)
}

fn regen_band() -> Outcome {
    let start = Instant::now();
    let r = run(&load("single_train.toml")).expect("run");
    let elapsed = start.elapsed().as_secs_f64();
    let accel = kwh(r.report.accel_energy);
    let ratio = r.report.regen_ratio.unwrap_or(f64::NAN);
    let pass = (accel - 20.7).abs() <= 1.0 && (0.72..=0.84).contains(&ratio) && elapsed < 5.0;
    outcome(pass, format!("accel {accel:.2} kWh, ratio {ratio:.4}, {elapsed:.3} s"))
}

fn decel_suite() -> Outcome {
    // ordered from gentlest to steepest deceleration
    let cases = ["decel_case2.toml", "decel_case1.toml", "decel_case3.toml"];
    let runs: Vec<RunResult> = cases.iter().map(|c| run(&load(c)).expect("run")).collect();
    let ratios: Vec<f64> = runs.iter().map(|r| r.report.regen_ratio.unwrap_or(f64::NAN)).collect();
    let peaks: Vec<f64> = runs.iter().map(peak_braking_current).collect();
    let in_band = ratios.iter().all(|r| (0.70..=0.90).contains(r));
    let increasing = peaks.windows(2).all(|w| w[1] > w[0]);
    outcome(in_band && increasing, format!("ratios {ratios:.4?}, peak braking current {peaks:.0?} A"))
}

fn conservation() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    let mut pass = true;
    let mut names = Vec::new();
    for (name, mut s) in shipped() {
        s.dt_network = 0.1;
        let coarse = run(&s).expect("run").ledger.relative_residual();
        s.dt_network = 0.01;
        let fine = run(&s).expect("run").ledger.relative_residual();
        pass &= coarse < 5e-3 && fine < 1e-3;
        worst = (worst.0.max(coarse), worst.1.max(fine));
        names.push(name);
    }
    outcome(
        pass,
        format!("{} scenarios, worst residual {:.2e} at 0.1 s, {:.2e} at 0.01 s", names.len(), worst.0, worst.1),
    )
}

fn two_node(r_line: f64) -> NetworkGraph {
    NetworkGraph {
        nodes: vec![
            Node { position: 0.0, substations: vec![0], trains: vec![] },
            Node { position: 1.0, substations: vec![], trains: vec![0] },
        ],
        branches: vec![rbsim_core::rail::Branch { from: 0, to: 1, r_power: r_line, r_traction: 0.0 }],
    }
}

fn solver_oracle() -> Outcome {
    let v0 = 650.0;
    let r_th = 0.01;
    let opts = SolverOptions { tol: 1e-9, ..Default::default() };
    let mut rng = StdRng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut counts = [0usize; 3];
    for k in 0..100 {
        let r_line = rng.gen_range(0.001..0.05);
        let r = r_th + r_line;
        let p_max = v0 * v0 / (4.0 * r);
        // motoring, then regenerating into a bidirectional source with and without a chopper
        let (p, diode, v_act) = match k % 4 {
            0 | 1 => (rng.gen_range(0.0..0.9) * p_max, true, 780.0),
            2 => (-rng.gen_range(1e4..3e6), false, f64::INFINITY),
            _ => (-rng.gen_range(1e4..3e6), false, rng.gen_range(660.0..900.0)),
        };
        let sub = SubstationParams { v0, r_th, diode, ..Default::default() };
        let train = TrainLoad { power: p, chopper: ChopperLimit { v_act, conductance: 20.0 } };
        let quad = 0.5 * (v0 + (v0 * v0 - 4.0 * r * p).sqrt());
        let expected = quad.min(v_act);
        counts[match k % 4 {
            0 | 1 => 0,
            2 => 1,
            _ if quad > v_act => 2,
            _ => 1,
        }] += 1;
        let got = solve(&two_node(r_line), &[train], &[sub], &opts).expect("solve").train_voltages[0];
        worst = worst.max((got - expected).abs());
    }
    outcome(
        worst <= 1e-9,
        format!(
            "{} motoring, {} unclamped regen, {} clamped regen, max error {worst:.2e} V",
            counts[0], counts[1], counts[2]
        ),
    )
}

fn rail_telescoping() -> Outcome {
    let layout = TrackLayout {
        station_positions: vec![0.0, 900.0, 2100.0, 3000.0],
        substation_positions: vec![0.0, 1300.0, 3000.0],
        r_power_per_m: 10e-6,
        r_traction_per_m: 20e-6,
        extent: (0.0, 3000.0),
    };
    let r_unit = layout.r_power_per_m + layout.r_traction_per_m;
    let subs = &layout.substation_positions;
    let mut rng = StdRng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = rng.gen_range(0.0..3000.0);
        let g = build_graph(&layout, &[x], 0.0).expect("graph");
        let section = subs.windows(2).position(|w| x >= w[0] && x <= w[1]).expect("inside");
        let (a, b) = (subs[section], subs[section + 1]);
        let ia = g.nodes.iter().position(|n| n.position == a).unwrap();
        let ib = g.nodes.iter().position(|n| n.position == b).unwrap();
        let sum: f64 = g.branches[ia..ib].iter().map(|br| br.r_power + br.r_traction).sum();
        let exact = (b - a) * r_unit;
        worst = worst.max((sum - exact).abs() / exact);
    }
    outcome(worst <= 1e-12, format!("1000 positions, max relative error {worst:.2e}"))
}

fn drivetrain_points() -> Outcome {
    let p = VehicleParams::default();
    let m = wheel_to_motor(1000.0, 10.0, &p);
    let b = wheel_to_motor(-1000.0, 10.0, &p);
    let round3 = |x: f64| (x * 1000.0).round() / 1000.0;
    let examples = m.torque == 1040.0 / 6.64
        && b.torque == -960.0 / 6.64
        && round3(m.torque) == 156.627
        && round3(b.torque) == -144.578;
    let ideal = VehicleParams { gear_efficiency: 1.0, ..p };
    let lossless = [-2500.0, -1.0, 0.0, 7.5, 4196.4].iter().all(|&t| wheel_to_motor(t, 3.0, &ideal).torque == t / 6.64);
    outcome(examples && lossless, format!("T_G {:.3} / {:.3} N*m, lossless exact {lossless}", m.torque, b.torque))
}

fn dtc_tracking() -> Outcome {
    let m = MachineParams::default();
    let bands = DtcBands::for_machine(&m);
    let t_ref = 500.0;
    let start = Instant::now();
    let w = run_torque_step(m.clone(), t_ref, 100.0, 650.0, 2e-6, 0.5).expect("torque step");
    let elapsed = start.elapsed().as_secs_f64();
    let tail = &w[w.len() / 5..];
    let mean_err = tail.iter().map(|s| (s.torque - t_ref).abs()).sum::<f64>() / tail.len() as f64;
    let limit = bands.torque + 0.05 * m.rated_torque;
    let settled: Vec<_> = w.iter().filter(|s| s.time > 0.05).collect();
    let inside =
        settled.iter().filter(|s| (s.flux - m.rated_flux).abs() <= bands.flux).count() as f64 / settled.len() as f64;
    let pass = mean_err <= limit && inside >= 0.95 && elapsed < 30.0;
    outcome(
        pass,
        format!("mean |dT| {mean_err:.1} N*m (limit {limit:.0}), flux in band {:.1} %, {elapsed:.1} s", 100.0 * inside),
    )
}

/// Rising-falling triangle through both thresholds.
fn triangle(settings: ChopperSettings, low: f64, peak: f64, n: usize) -> bool {
    let mut s = ChopperState::new(settings, 2.0);
    let up = (0..=n).map(|k| low + (peak - low) * k as f64 / n as f64);
    let down = (0..n).rev().map(|k| low + (peak - low) * k as f64 / n as f64);
    let (mut ons, mut offs, mut ok) = (0, 0, true);
    for v in up.chain(down) {
        let (next, p) = chopper_step(v, &s);
        ons += usize::from(next.on && !s.on);
        offs += usize::from(!next.on && s.on);
        ok &= (p > 0.0) == next.on;
        ok &= v > settings.v_rel || p == 0.0;
        s = next;
    }
    ok && ons == 1 && offs == 1
}

fn chopper_hysteresis() -> Outcome {
    let mut checked = 0;
    let mut failed = 0;
    for v_rel in (600..=900).step_by(10) {
        for gap in [0.5, 1.0, 5.0, 20.0, 50.0, 100.0] {
            for margin in [0.1, 1.0, 10.0, 100.0] {
                for n in [7, 50, 333] {
                    let v_rel = f64::from(v_rel);
                    let settings = ChopperSettings { v_act: v_rel + gap, v_rel };
                    checked += 1;
                    failed += usize::from(!triangle(settings, 500.0, v_rel + gap + margin, n));
                }
            }
        }
    }
    outcome(failed == 0, format!("{checked} threshold placements, {failed} violations"))
}

fn complementarity() -> Outcome {
    let mut steps = 0usize;
    let mut violations = 0usize;
    for (_, s) in shipped() {
        let tol = s.solver.tol;
        for rec in &run(&s).expect("run").records {
            for b in &rec.busbars {
                steps += 1;
                let blocked = b.current * (b.voltage - b.v0).max(0.0);
                violations += usize::from(b.current < -tol || blocked.abs() > tol);
            }
        }
    }
    outcome(violations == 0, format!("{steps} busbar samples, {violations} violations"))
}

fn dt_convergence() -> Outcome {
    let mut s = load("single_train.toml");
    s.dt_network = 0.1;
    let a = run(&s).expect("run").report;
    s.dt_network = 0.05;
    let b = run(&s).expect("run").report;
    let da = ((b.accel_energy - a.accel_energy) / a.accel_energy).abs();
    let dd = ((b.decel_energy - a.decel_energy) / a.decel_energy).abs();
    outcome(da < 2e-3 && dd < 2e-3, format!("accel change {:.2e} %, decel change {:.2e} %", 100.0 * da, 100.0 * dd))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("regen ratio band", regen_band),
        ("deceleration suite", decel_suite),
        ("energy conservation", conservation),
        ("two-node solver oracle", solver_oracle),
        ("rail telescoping", rail_telescoping),
        ("drivetrain points", drivetrain_points),
        ("dtc tracking", dtc_tracking),
        ("chopper hysteresis", chopper_hysteresis),
        ("diode complementarity", complementarity),
        ("dt convergence", dt_convergence),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failures += usize::from(!o.pass);
        println!("criterion {:>2} {:<24} {}  {}", k + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
