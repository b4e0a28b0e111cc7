//! `limuon` CLI: run experiments, validate gradients, and summarize result
//! files.
//!
//! Exit codes: 0 success, 1 gradcheck over tolerance, 2 usage/config error,
//! 3 insufficient data, 4 divergence detected.

use clap::{Parser, Subcommand};
use limuon_harness::config::ExperimentSpec;
use limuon_harness::error::HarnessError;
use limuon_harness::{report, runner};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "limuon", version, about = "Benchmark harness for Muon/LiMuon optimizers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write one CSV row per recorded step.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override config fields, e.g. --set optimizer.T=3000.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output CSV path (overrides output_path in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of repeats (overrides repeats in the config).
        #[arg(long)]
        seeds: Option<u32>,
    },
    /// Validate problem gradients against central finite differences.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Fit the decay exponent of avg nuclear gradient norms across horizons.
    RateReport {
        /// Result CSV files (>= 3 distinct horizons among them).
        files: Vec<PathBuf>,
    },
    /// Report persistent state-memory element counts for the configured
    /// optimizer.
    MemoryReport {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn load_spec(path: &PathBuf, overrides: &[String]) -> Result<ExperimentSpec, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ExperimentSpec::from_json_with_overrides(&text, overrides)
}

fn fail(err: &HarnessError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            set,
            out,
            seeds,
        } => {
            let mut spec = match load_spec(&config, &set) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            if let Some(n) = seeds {
                spec.repeats = n;
                if let Err(e) = spec.validate() {
                    return fail(&e);
                }
            }
            let out_path = match out.or_else(|| spec.output_path.clone().map(PathBuf::from)) {
                Some(p) => p,
                None => {
                    return fail(&HarnessError::Config(
                        "no output path: pass --out or set output_path".into(),
                    ))
                }
            };
            match runner::run_experiment(&spec, &out_path) {
                Ok(report) => {
                    eprintln!(
                        "wrote {} rows to {}",
                        report.rows_written,
                        report.path.display()
                    );
                    if report.diverged_runs > 0 {
                        eprintln!("{} run(s) diverged", report.diverged_runs);
                        ExitCode::from(4)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::Gradcheck { config, set } => {
            let spec = match load_spec(&config, &set) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            match report::gradcheck(&spec) {
                Ok(r) => {
                    println!("{}", serde_json::to_string_pretty(&r).unwrap());
                    if r.pass {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!(
                            "gradcheck failed: max relative error {} > {}",
                            r.max_rel_error, r.tolerance
                        );
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::RateReport { files } => {
            if files.is_empty() {
                return fail(&HarnessError::InsufficientData(
                    "no result files given".into(),
                ));
            }
            match report::rate_report(&files) {
                Ok(r) => {
                    println!("{}", serde_json::to_string_pretty(&r).unwrap());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::MemoryReport { config, set } => {
            let spec = match load_spec(&config, &set) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            match report::memory_report(&spec) {
                Ok(r) => {
                    println!("{}", serde_json::to_string_pretty(&r).unwrap());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
