use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use rbsim_core::batch::run_batch;
use rbsim_core::drive::emit_waveform;
use rbsim_core::output::{emit_timeseries, summary};
use rbsim_core::{Mode, RunOptions, RunResult, Scenario};

/// Drive waveforms are sampled every this many control steps.
const WAVEFORM_EVERY: usize = 20;

#[derive(Parser)]
#[command(name = "rbsim", version, about = "DC rail corridor simulator with regenerative braking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario files.
    Run {
        /// Scenario files (TOML).
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Override the mode set in the scenario files.
        #[arg(long)]
        mode: Option<Mode>,
        /// Directory for the time series and summary files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write per-train drive waveforms (drive_level mode).
        #[arg(long)]
        emit_plot_data: bool,
    },
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned())
}

fn write_outputs(out: &Path, name: &str, scenario: &Scenario, result: &RunResult, plot_data: bool) -> Result<String> {
    let n_trains = scenario.trains.len();
    let n_subs = scenario.substations.len();
    let ts = out.join(format!("{name}.timeseries.csv"));
    fs::write(&ts, emit_timeseries(&result.records, n_trains, n_subs))
        .with_context(|| format!("writing {}", ts.display()))?;
    let text = format!("scenario: {name}\nmode: {}\n{}", result.mode, summary(&result.report, &result.ledger));
    let sm = out.join(format!("{name}.summary.txt"));
    fs::write(&sm, &text).with_context(|| format!("writing {}", sm.display()))?;
    if plot_data {
        for (k, w) in result.waveforms.iter().enumerate() {
            let path = out.join(format!("{name}.train{}.waveform.csv", k + 1));
            fs::write(&path, emit_waveform(w)).with_context(|| format!("writing {}", path.display()))?;
        }
        if result.waveforms.is_empty() {
            info!("{name}: no drive waveforms in {} mode", result.mode);
        }
    }
    Ok(text)
}

fn run(scenarios: &[PathBuf], mode: Option<Mode>, out: &Path, plot_data: bool) -> Result<()> {
    let loaded = scenarios
        .iter()
        .map(|p| {
            let mut s = Scenario::load(p).with_context(|| p.display().to_string())?;
            if let Some(m) = mode {
                s.mode = m;
            }
            s.validate().with_context(|| p.display().to_string())?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let opts = RunOptions { waveform_every: plot_data.then_some(WAVEFORM_EVERY) };
    let results = run_batch(&loaded, &opts);
    for ((path, scenario), result) in scenarios.iter().zip(&loaded).zip(results) {
        let result = result.with_context(|| path.display().to_string())?;
        let text = write_outputs(out, &stem(path), scenario, &result, plot_data)?;
        print!("{text}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { scenarios, mode, out, emit_plot_data } => run(&scenarios, mode, &out, emit_plot_data),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // the core errors already spell out their causes, so stop after the first one
            let line: Vec<String> = e.chain().take(2).map(ToString::to_string).collect();
            eprintln!("error: {}", line.join(": "));
            ExitCode::FAILURE
        }
    }
}
