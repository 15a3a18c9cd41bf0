//! `blowup`: command-line driver for the blow-up laboratory.
//!
//! Exit codes: 0 success, 2 hypotheses H1/H2 fail, 3 configuration error,
//! 4 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use blowup_core::{Error, ErrorClass};
use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;

const EXIT_CONFIG: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "blowup", version, about = "Blow-up experiments for a semilinear stochastic wave equation")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Path seed for `spde-run`, master seed for `mc`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the Courant number `dt / dx`.
    #[arg(long, global = true)]
    cfl: Option<f64>,
    /// Worker threads for `mc` (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check H1/H2 and compute the blow-up time bound T.
    Bound,
    /// Solve the deterministic comparison problem.
    DetSolve,
    /// Simulate one stochastic path.
    SpdeRun,
    /// Run a Monte Carlo campaign.
    Mc,
    /// Compare the ODE hitting time with the quadrature bound.
    OdeCheck,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Hypothesis => commands::EXIT_HYPOTHESIS,
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let path = cli
        .config
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut config = RunConfig::load(&path)?;
    if let Some(cfl) = cli.cfl {
        config.cfl = cfl;
    }
    let output_dir = cli
        .output_dir
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context {
        config,
        output_dir,
        seed: cli.seed,
        threads: cli.threads,
    };
    match cli.command {
        Command::Bound => commands::bound(&ctx),
        Command::DetSolve => commands::det_solve(&ctx),
        Command::SpdeRun => commands::spde_run(&ctx),
        Command::Mc => commands::mc(&ctx),
        Command::OdeCheck => commands::ode_check(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
