use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fuelrec_cli::{stages, CliResult, PipelineConfig};
use fuelrec_core::model::ModelMode;

#[derive(Parser)]
#[command(name = "fuelrec", version, about = "Fuel-consumption anomaly explanations and savings recommendations")]
struct Cli {
    /// Pipeline config (TOML). Defaults apply without one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` (for `synth`, the generator seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `paths.output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic fleet with ground truth.
    Synth,
    /// Raw telemetry to the cleaned, imputed FAR and train/test split.
    Ingest {
        /// Raw telemetry CSV, overriding `paths.input`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Label anomalous vehicle-days and compute limits.
    Detect,
    /// Train models.
    Train {
        #[arg(long)]
        mode: Option<ModelMode>,
    },
    /// Explain outlier days and prune the explanations.
    Explain {
        #[arg(long)]
        mode: Option<ModelMode>,
    },
    /// Daily, operator and fleet-manager recommendations.
    Recommend {
        #[arg(long)]
        mode: Option<ModelMode>,
    },
    /// Metrics report and contrast tables.
    Evaluate,
    /// Every step in order.
    RunAll,
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), std::env::vars())?;
    if let Some(out) = cli.out {
        cfg.paths.output = out;
    }
    if let Some(seed) = cli.seed {
        match cli.command {
            Command::Synth => cfg.synth.get_or_insert_with(Default::default).seed = seed,
            _ => cfg.seed = seed,
        }
    }
    cfg.validate()?;
    match cli.command {
        Command::Synth => stages::synth(&cfg),
        Command::Ingest { input } => {
            if input.is_some() {
                cfg.paths.input = input;
            }
            stages::ingest(&cfg)
        }
        Command::Detect => stages::detect(&cfg),
        Command::Train { mode } => stages::train(&cfg, mode),
        Command::Explain { mode } => stages::explain(&cfg, mode),
        Command::Recommend { mode } => stages::recommend(&cfg, mode),
        Command::Evaluate => stages::evaluate(&cfg).map(|_| ()),
        Command::RunAll => stages::run_all(&cfg).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("fuelrec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
