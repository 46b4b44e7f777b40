//! Command-line driver tying scene generation, training, baseline fitting,
//! reconstruction, evaluation and ablations together under one config file.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 shape
//! mismatch, 4 numerical failure.

mod ablate;
mod commands;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use btomo_core::config::RunConfig;
use btomo_core::{par, Error};

#[derive(Parser)]
#[command(name = "btomo", version, about = "Magnetic reconstruction of binary conductivity maps")]
struct Cli {
    /// TOML configuration file; omit to run the built-in reference setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override every seed in the configuration (dataset, training,
    /// evaluation, fold assignment).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; artifact paths from the config resolve against it.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Force all data-parallel loops to run sequentially.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate scenes and write the dataset file.
    Generate {
        /// Number of scenes (overrides dataset.n_scenes).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Train the invertible network on a dataset.
    Train {
        /// Dataset file (defaults to dataset.path under --out).
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Fit the Tikhonov and ElasticNet baselines with cross-validation.
    FitLinear {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Write continuous reconstructions for a trained model.
    Reconstruct {
        /// Model file: a BINN checkpoint or a BLIN linear model.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Which split to reconstruct: val or train.
        #[arg(long, default_value = "val")]
        split: String,
        /// Output predictions file (defaults to predictions_<model>.bprd).
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Score prediction files with the dither log-likelihood.
    Evaluate {
        /// One or more prediction files.
        #[arg(long, required = true, num_args = 1..)]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Sweep sensor distance, sensor count and coupling-block count.
    Ablate,
    /// Run the built-in oracle suites (wire field, gradients, dithering).
    Selftest,
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.dataset.seed = seed;
        cfg.inn.seed = seed;
        cfg.eval.seed = seed;
        cfg.linear.fold_seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    if cli.deterministic {
        par::set_force_sequential(true);
    }
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cli.out)?;
    let ctx = commands::Ctx {
        cfg,
        out: cli.out.clone(),
    };
    match &cli.cmd {
        Command::Generate { n } => commands::generate(&ctx, *n),
        Command::Train { dataset } => commands::train(&ctx, dataset.as_deref()),
        Command::FitLinear { dataset } => commands::fit_linear(&ctx, dataset.as_deref()),
        Command::Reconstruct {
            model,
            dataset,
            split,
            predictions,
        } => commands::reconstruct(&ctx, model, dataset.as_deref(), split, predictions.as_deref()),
        Command::Evaluate {
            predictions,
            dataset,
        } => commands::evaluate(&ctx, predictions, dataset.as_deref()),
        Command::Ablate => ablate::run(&ctx),
        Command::Selftest => selftest::run(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
