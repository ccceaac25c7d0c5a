use std::io::{ErrorKind, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;
use spade_cli::commands::{self, EstimateArgs, TestArgs};
use spade_cli::config::{self, EntropySweepConfig, SimulateConfig};
use spade_cli::output::write_json;
use spade_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "spade", version, about = "Threshold tests for faint companions with spatial-mode demultiplexing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate relative entropies over a scene and crosstalk grid.
    EntropySweep {
        #[arg(long)]
        config: PathBuf,
        /// Replaces `output` from the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Calibrate a threshold, sweep the scene grid and report error rates.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Replaces `output.results` from the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads; results are identical for any value.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Apply the threshold test to a counts file.
    Test {
        #[arg(long)]
        counts: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Star-only counts; the threshold is their calibrated percentile.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        c10: Option<f64>,
        #[arg(long)]
        c01: Option<f64>,
        /// Detected photons per repetition, for the analytic threshold.
        #[arg(long = "n-total")]
        n_total: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Invert the analytic threshold formula for the crosstalk.
    EstimateCrosstalk {
        #[arg(long, conflicts_with = "n_star")]
        counts: Option<PathBuf>,
        #[arg(long = "n-star")]
        n_star: Option<f64>,
        #[arg(long = "n-total")]
        n_total: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn emit(value: &Value, output: Option<&PathBuf>) -> CliResult<()> {
    match output {
        Some(path) => write_json(path, value),
        None => {
            let text = serde_json::to_string_pretty(value).expect("serialisable");
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(CliError::Io { path: "<stdout>".into(), source: e }),
                _ => Ok(()),
            }
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::EntropySweep { config, output } => {
            let mut cfg: EntropySweepConfig = config::load(&config)?;
            if let Some(path) = output {
                cfg.output = path;
            }
            emit(&commands::cmd_entropy_sweep(&cfg)?, None)
        }
        Command::Simulate {
            config,
            seed,
            repetitions,
            output,
            threads,
        } => {
            let mut cfg: SimulateConfig = config::load(&config)?;
            if let Some(s) = seed {
                cfg.override_seed(s);
            }
            if let Some(r) = repetitions {
                cfg.override_repetitions(r);
            }
            if let Some(p) = output {
                cfg.override_results(p);
            }
            let summary = commands::cmd_simulate(&cfg, threads)?;
            if cfg.output.summary.is_none() {
                emit(&summary, None)?;
            }
            Ok(())
        }
        Command::Test {
            counts,
            alpha,
            calibration,
            c10,
            c01,
            n_total,
            output,
        } => {
            let args = TestArgs {
                counts,
                alpha,
                calibration,
                c10,
                c01,
                n_total,
            };
            emit(&commands::cmd_test(&args)?, output.as_ref())
        }
        Command::EstimateCrosstalk {
            counts,
            n_star,
            n_total,
            alpha,
            output,
        } => {
            let args = EstimateArgs {
                counts,
                n_star,
                n_total,
                alpha,
            };
            emit(&commands::cmd_estimate_crosstalk(&args)?, output.as_ref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spade: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
