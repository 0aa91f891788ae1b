//! `e2e-tcn` command-line tool: train and evaluate quadrotor multi-step
//! motion-prediction models, run scaling/ablation studies, analyze error
//! distributions, and generate synthetic telemetry.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numeric fault,
//! 5 IO error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use e2e_tcn_harness::commands;
use e2e_tcn_harness::config::{load_config, ExperimentConfig};
use e2e_tcn_harness::error::HarnessError;

#[derive(Parser)]
#[command(
    name = "e2e-tcn",
    about = "Quadrotor multi-step motion prediction experiments"
)]
struct Cli {
    /// Experiment configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed; overrides the config file's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSV artifacts and checkpoints.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured model; writes a checkpoint and loss-curve CSVs.
    Train,
    /// Evaluate a model over the held-out windows; writes horizon reports.
    Eval {
        /// Trained model checkpoint (not needed for the physics model).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train/evaluate one model per layer count and report size/speed/error.
    Scaling {
        /// Comma-separated residual block counts.
        #[arg(long, value_delimiter = ',', default_values_t = [5usize, 8, 10, 12])]
        layers: Vec<usize>,
    },
    /// Run the six-row architecture ablation grid on shared data.
    Ablate,
    /// Error-distribution statistics and worst-window dumps.
    Errdist {
        /// Trained model checkpoint (not needed for the physics model).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Generate synthetic telemetry flights as CSV files.
    Synth,
}

fn run(cli: &Cli) -> Result<String, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let seed = cfg.seed;
    match &cli.command {
        Command::Train => commands::cmd_train(&cfg, seed, &cli.out),
        Command::Eval { checkpoint } => {
            commands::cmd_eval(&cfg, seed, &cli.out, checkpoint.as_deref())
        }
        Command::Scaling { layers } => commands::cmd_scaling(&cfg, seed, &cli.out, layers),
        Command::Ablate => commands::cmd_ablate(&cfg, seed, &cli.out),
        Command::Errdist { checkpoint } => {
            commands::cmd_errdist(&cfg, seed, &cli.out, checkpoint.as_deref())
        }
        Command::Synth => commands::cmd_synth(&cfg, seed, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(table) => {
            print!("{table}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
