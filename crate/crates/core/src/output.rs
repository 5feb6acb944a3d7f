//! Comma-separated time series and the summary block.

use std::fmt::Write as _;

use crate::energy::{kwh, EnergyLedger, EnergyReport};
use crate::engine::StepRecord;

pub const TRAIN_COLUMNS: [&str; 8] = [
    "position_m",
    "speed_mps",
    "tractive_force_N",
    "electrical_power_W",
    "train_current_A",
    "train_voltage_V",
    "chopper_power_W",
    "cumulative_energy_J",
];

pub const GLOBAL_COLUMNS: [&str; 3] = ["substation_energy_J", "rail_loss_J", "chopper_energy_J"];

pub fn timeseries_header(n_trains: usize, n_substations: usize) -> Vec<String> {
    let mut cols = vec!["time_s".to_string()];
    for k in 1..=n_trains {
        cols.extend(TRAIN_COLUMNS.iter().map(|c| format!("train{k}_{c}")));
    }
    cols.extend((1..=n_substations).map(|s| format!("sub{s}_current_A")));
    cols.extend(GLOBAL_COLUMNS.iter().map(|c| c.to_string()));
    cols
}

pub fn emit_timeseries(records: &[StepRecord], n_trains: usize, n_substations: usize) -> String {
    let mut out = timeseries_header(n_trains, n_substations).join(",");
    out.push('\n');
    for r in records {
        let mut row = vec![r.time];
        for s in &r.trains {
            row.extend([
                s.position,
                s.speed,
                s.forces.tractive,
                s.electrical_power,
                s.current,
                s.voltage,
                s.chopper_power,
                s.cumulative_energy,
            ]);
        }
        row.extend(&r.substation_currents);
        row.extend([r.substation_energy, r.rail_loss_energy, r.chopper_energy]);
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn ratio_text(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

/// `key: value` lines, totals first, then per train and per substation.
pub fn summary(report: &EnergyReport, ledger: &EnergyLedger) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "accel_kWh: {:.4}", kwh(report.accel_energy));
    let _ = writeln!(s, "decel_kWh: {:.4}", kwh(report.decel_energy));
    let _ = writeln!(s, "regen_ratio: {}", ratio_text(report.regen_ratio));
    let _ = writeln!(s, "chopper_kWh: {:.4}", kwh(report.chopper_energy));
    let _ = writeln!(s, "substation_kWh: {:.4}", kwh(report.substation_energy()));
    let _ = writeln!(s, "rail_loss_kWh: {:.4}", kwh(report.rail_loss));
    let _ = writeln!(s, "ledger_residual: {:.3e}", ledger.relative_residual());
    for (k, t) in report.trains.iter().enumerate() {
        let k = k + 1;
        let _ = writeln!(s, "train{k}.accel_kWh: {:.4}", kwh(t.accel_energy));
        let _ = writeln!(s, "train{k}.decel_kWh: {:.4}", kwh(t.decel_energy));
        let _ = writeln!(s, "train{k}.regen_ratio: {}", ratio_text(t.regen_ratio));
        let _ = writeln!(s, "train{k}.chopper_kWh: {:.4}", kwh(t.chopper_energy));
    }
    for (k, e) in report.substations.iter().enumerate() {
        let _ = writeln!(s, "sub{}.kWh: {:.4}", k + 1, kwh(*e));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::TrainState;

    #[test]
    fn empty_run_is_header_only() {
        let text = emit_timeseries(&[], 2, 1);
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 1 + 8 * 2 + 1 + 3);
    }

    #[test]
    fn one_step_is_header_and_row() {
        let rec = StepRecord {
            time: 0.5,
            trains: vec![TrainState { speed: 3.0, voltage: 640.0, ..Default::default() }],
            substation_currents: vec![10.0, 20.0],
            ..Default::default()
        };
        let text = emit_timeseries(&[rec], 1, 2);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let header: Vec<&str> = lines[0].split(',').collect();
        let row: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(header.len(), 1 + 8 + 2 + 3);
        assert_eq!(row.len(), header.len());
        assert_eq!(header[2], "train1_speed_mps");
        assert_eq!(row[2], "3");
        assert_eq!(header[9], "sub1_current_A");
        assert_eq!(row[10], "20");
    }

    #[test]
    fn summary_keys() {
        let report = EnergyReport { accel_energy: 3.6e6, ..Default::default() };
        let s = summary(&report, &EnergyLedger::default());
        for key in
            ["accel_kWh: 1.0000", "decel_kWh:", "regen_ratio:", "chopper_kWh:", "substation_kWh:", "rail_loss_kWh:"]
        {
            assert!(s.contains(key), "{key} missing in\n{s}");
        }
        let s = summary(&EnergyReport::default(), &EnergyLedger::default());
        assert!(s.contains("regen_ratio: n/a"));
    }
}
