//! Command-line experiment runner for the `bootsl` engine.

pub mod config;
pub mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::FieldError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<FieldError>),
    #[error(transparent)]
    Runtime(#[from] bootsl::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bootsl", version, about = "Bootstrapped synthetic likelihood experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the observed dataset and its summary statistics.
    Simulate(Common),
    /// Repeated likelihood estimates at one parameter value.
    Estimate(Common),
    /// One Metropolis-Hastings chain per configured estimator.
    Mcmc(Common),
    /// Sequential Monte Carlo with BLB synthetic likelihood.
    Smc(Common),
    /// Exchange algorithm for the Ising model.
    Exchange(Common),
    /// Replicate chains per estimator with bias, sd and RMSE tables.
    Replicate(Common),
    /// The preset protocol for the experiment kind.
    Experiment(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML). A manifest from an earlier run works too.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from a built-in preset: toy, lv or ising.
    #[arg(long)]
    pub preset: Option<String>,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum concurrent chains or replicates.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Multiply iteration counts, particle counts and toy data sizes.
    #[arg(long)]
    pub scale: Option<f64>,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::Estimate(c)
            | Command::Mcmc(c)
            | Command::Smc(c)
            | Command::Exchange(c)
            | Command::Replicate(c)
            | Command::Experiment(c) => c,
        }
    }
}

/// Resolve the config for a command line: file or preset, then overrides.
pub fn load_config(common: &Common) -> Result<config::ExperimentConfig, CliError> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::Config(vec![FieldError { path: "--config".into(), reason: format!("{}: {e}", p.display()) }]))?,
        None if common.preset.is_some() => String::new(),
        None => {
            return Err(CliError::Config(vec![FieldError {
                path: "--config".into(),
                reason: "pass --config PATH or --preset NAME".into(),
            }]))
        }
    };
    let mut cfg = config::parse_config(&text, common.preset.as_deref()).map_err(CliError::Config)?;
    cfg.apply_overrides(common.seed, common.scale).map_err(CliError::Config)?;
    cfg.command = None;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let common = cli.command.common();
    let cfg = load_config(common)?;
    let ctx = run::Context::new(cfg, common.out.clone(), common.jobs)?;
    match cli.command {
        Command::Simulate(_) => run::simulate(&ctx),
        Command::Estimate(_) => run::estimate(&ctx),
        Command::Mcmc(_) => run::mcmc(&ctx),
        Command::Smc(_) => run::smc(&ctx),
        Command::Exchange(_) => run::exchange(&ctx),
        Command::Replicate(_) => run::replicate(&ctx),
        Command::Experiment(_) => run::experiment(&ctx),
    }
}
