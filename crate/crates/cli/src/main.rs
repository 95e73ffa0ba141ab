//! `fastslow`: simulations, convergence sweeps, thermodynamic checks,
//! two-scale errors and the identity suite for the fast-slow oscillator.
//!
//! Exit codes: 0 all checks passed, 1 a threshold failed, 2 configuration
//! error, 3 numerical or output failure.

mod commands;
mod config;
mod manifest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::{preset_defaults, ConfigError, RunConfig};
use crate::manifest::{file_entry, RunManifest};
use crate::report::Output;

/// Environment variable bounding the worker pool.
const WORKERS_VAR: &str = "FASTSLOW_WORKERS";

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] fastslow_core::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numerical(_) | AppError::Output { .. } => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "fastslow", version, about = "Fast-slow oscillator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated ε list, overriding `run.epsilons`.
    #[arg(long, global = true, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// Frequency preset (constant, sine, custom), overriding `frequency.preset`.
    #[arg(long, global = true)]
    preset: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Trajectories at each ε plus the leading-order and averaged solutions.
    Simulate,
    /// Residual norms and fitted convergence orders across the ε list.
    Sweep,
    /// Averaged thermodynamic quantities, first-law and equipartition checks.
    Thermo,
    /// Nonlinear two-scale errors of the oscillation profiles.
    Twoscale,
    /// Analytic identity suite.
    Check {
        #[arg(long, hide = true)]
        flip_corrector_sign: bool,
    },
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Thermo => "thermo",
            Command::Twoscale => "twoscale",
            Command::Check { .. } => "check",
        }
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &cli.preset {
        let preset = p
            .parse()
            .map_err(|e: fastslow_core::Error| ConfigError::Invalid(e.to_string()))?;
        if preset != cfg.preset {
            cfg.preset = preset;
            cfg.coefficients = preset_defaults(preset);
        }
    }
    if let Some(eps) = &cli.epsilon {
        cfg.epsilons = eps.clone();
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_workers() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var(WORKERS_VAR) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        ConfigError::Invalid(format!(
            "{WORKERS_VAR} must be a positive integer, got `{v}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::Invalid(format!("cannot size worker pool: {e}")))
}

fn run(cli: &Cli, start: Instant) -> Result<bool, AppError> {
    configure_workers()?;
    let cfg = effective_config(cli)?;
    let setup = cfg.setup()?;
    let mut out = Output::new(&cfg.out_dir)?;
    let passed = match cli.command {
        Command::Simulate => commands::simulate(&cfg, &setup, &mut out),
        Command::Sweep => commands::sweep(&cfg, &setup, &mut out),
        Command::Thermo => commands::thermo(&cfg, &setup, &mut out),
        Command::Twoscale => commands::twoscale(&cfg, &setup, &mut out),
        Command::Check {
            flip_corrector_sign,
        } => commands::check(&cfg, &setup, &mut out, flip_corrector_sign),
    }?;
    let files = out
        .files
        .iter()
        .map(|f| file_entry(&out.dir, f))
        .collect::<Result<_, _>>()?;
    RunManifest {
        command: cli.command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.to_text(),
        entropy_constant: setup.constants.entropy_constant,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        exit_code: if passed { 0 } else { 1 },
        files,
    }
    .write(&out.dir)?;
    Ok(passed)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cli = Cli::parse();
    match run(&cli, start) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
