//! `ct`: phantoms, simulation, reconstruction and theory checks from JSON
//! experiment configs.

// Range checks are written `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "ct", version, about = "Nonlinear Beer-Lambert CT reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON). Defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Reduced sample and problem sizes for a fast smoke run.
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Rasterize the phantom and write volume plus previews.
    Phantom,
    /// Simulate raw measurements of the phantom.
    Simulate,
    /// Reconstruct from previously simulated measurements.
    Reconstruct,
    /// Run the Monte Carlo theory checks.
    Verify,
    /// Nonlinear vs log-linearized reconstruction across density presets.
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Phantom => "phantom",
            Command::Simulate => "simulate",
            Command::Reconstruct => "reconstruct",
            Command::Verify => "verify",
            Command::Compare => "compare",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Malformed or unknown config keys.
    Config(String),
    /// Well-formed config with invalid values.
    Invalid(String),
    Io(String),
    Run(nlct::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => 2,
            CliError::Run(nlct::Error::Divergence { .. }) => 3,
            CliError::Run(
                nlct::Error::Domain(_)
                | nlct::Error::Shape(_)
                | nlct::Error::Geometry(_)
                | nlct::Error::Capacity(_)
                | nlct::Error::Unsupported(_),
            ) => 2,
            CliError::Io(_) | CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error {m}"),
            CliError::Invalid(m) => write!(f, "invalid config: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<nlct::Error> for CliError {
    fn from(e: nlct::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => config::ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    commands::check(&cfg)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(format!("{}: {e}", cfg.out.display())))?;
    let files = match cli.command {
        Command::Phantom => commands::phantom(&cfg)?,
        Command::Simulate => commands::simulate(&cfg)?,
        Command::Reconstruct => commands::reconstruct(&cfg)?,
        Command::Verify => commands::verify(&cfg, cli.quick)?,
        Command::Compare => commands::compare(&cfg, cli.quick)?,
    };
    manifest::write(&cfg, cli.command, cli.quick, &files)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ct: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
