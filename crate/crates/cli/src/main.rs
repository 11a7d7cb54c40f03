use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fspid_cli::scenario::{self, RunAnalysis, Scenario};

#[derive(Parser)]
#[command(
    name = "fspid",
    about = "Closed-loop pitch-control simulations: proportional, PID, and fuzzy self-tuning PID",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario or a scenario file, writing CSV traces and a
    /// metrics summary.
    Run {
        /// Built-in name (see `list`) or path to a scenario TOML file.
        scenario: String,
        /// Directory for CSV and summary output.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Override the control period of every run, seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the simulated duration of every run, seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// List the built-in scenarios.
    List,
    /// Parse and validate a scenario file without running it.
    Validate { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out_dir,
            dt,
            duration,
        } => run(&scenario, &out_dir, dt, duration),
        Command::List => {
            for name in Scenario::builtin_names() {
                let s = Scenario::builtin(name).expect("built-in exists");
                println!("{name:<6} {}", s.description);
            }
            ExitCode::SUCCESS
        }
        Command::Validate { path } => match Scenario::load(&path) {
            Ok(s) => {
                println!(
                    "ok: scenario `{}` with {} run(s), dt = {} s, duration = {} s",
                    s.name,
                    s.runs.len(),
                    s.dt,
                    s.duration
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("invalid scenario: {e}");
                ExitCode::FAILURE
            }
        },
    }
}

fn run(name_or_path: &str, out_dir: &Path, dt: Option<f64>, duration: Option<f64>) -> ExitCode {
    let mut scenario = match Scenario::resolve(name_or_path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Some(dt) = dt {
        scenario.dt = dt;
    }
    if let Some(duration) = duration {
        scenario.duration = duration;
    }

    let report = match scenario::run_scenario(&scenario) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let summary = match scenario::write_artifacts(&report, out_dir) {
        Ok(path) => path,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    for outcome in &report.outcomes {
        match &outcome.analysis {
            RunAnalysis::Diverged { time } => {
                eprintln!("{}: DIVERGED at t = {time} s", outcome.label);
            }
            _ => println!("{}: ok ({} samples)", outcome.label, outcome.trace.records.len()),
        }
    }
    println!("summary written to {}", summary.display());

    if report.any_diverged() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
