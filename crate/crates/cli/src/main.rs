use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rltlab::commands::{self, Method, TruncateArgs};
use rltlab::{ExperimentConfig, HarnessError};
use rltlab_core::synth::SynthConfig;

/// Ranked-list truncation experiments for retrieve-then-re-rank pipelines.
#[derive(Parser)]
#[command(name = "rltlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Fixed,
    Greedy,
    Surprise,
}

#[derive(Subcommand)]
enum Command {
    /// Metric of the composite list at every cut-off; writes the sweep cache.
    Sweep(ConfigArg),
    /// Oracle cut-offs, their CDF and a summary.
    Oracle(ConfigArg),
    /// EET target vectors for each configured preset.
    Targets {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Only the preset with this beta.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Feature JSONL for supervised truncators.
    Features {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Run an unsupervised truncation method and write its predictions.
    Truncate {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Fixed cut-off (default: every k in fixed_k_grid).
        #[arg(long)]
        k: Option<usize>,
        /// Greedy-k target preset (default: all presets).
        #[arg(long)]
        beta: Option<f64>,
        /// Greedy-k training targets; without it, folds are cross-fitted.
        #[arg(long)]
        train_targets: Option<PathBuf>,
    },
    /// Evaluation table over prediction files.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Prediction files (default: the predictions directory plus external files).
        predictions: Vec<PathBuf>,
    },
    /// Figure data and SVGs from the last evaluation.
    Plotdata(ConfigArg),
    /// Generate a seeded synthetic dataset with a config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SynthConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        queries: usize,
        #[arg(long, default_value_t = 100)]
        depth: usize,
    },
}

fn load(cfg: &ConfigArg) -> Result<ExperimentConfig, HarnessError> {
    ExperimentConfig::load(&cfg.config)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Sweep(c) => commands::sweep(&load(&c)?).map(|_| ()),
        Command::Oracle(c) => commands::oracle(&load(&c)?).map(|_| ()),
        Command::Targets { cfg, beta } => commands::targets(&load(&cfg)?, beta).map(|_| ()),
        Command::Features { cfg, beta } => commands::features(&load(&cfg)?, beta).map(|_| ()),
        Command::Truncate {
            cfg,
            method,
            k,
            beta,
            train_targets,
        } => {
            let method = match method {
                MethodArg::Fixed => Method::Fixed,
                MethodArg::Greedy => Method::Greedy,
                MethodArg::Surprise => Method::Surprise,
            };
            let args = TruncateArgs { k, beta, train_targets };
            commands::truncate(&load(&cfg)?, method, &args).map(|_| ())
        }
        Command::Evaluate { cfg, predictions } => commands::evaluate(&load(&cfg)?, &predictions).map(|_| ()),
        Command::Plotdata(c) => commands::plotdata(&load(&c)?).map(|_| ()),
        Command::Synth {
            out,
            seed,
            queries,
            depth,
        } => {
            if queries == 0 || depth == 0 {
                return Err(HarnessError::Validation("queries and depth must be positive".into()));
            }
            let cfg = SynthConfig {
                seed,
                queries,
                depth,
                ..SynthConfig::default()
            };
            commands::synth(&out, &cfg).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
