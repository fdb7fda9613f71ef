//! `shuffleopt`: run shuffled finite-sum optimizers, certify their
//! per-epoch inequalities, and estimate convergence rates.
//!
//! Exit codes: 0 success, 1 check or rate failure, 2 configuration error,
//! 3 numerical failure during a run.

mod commands;
mod config;
mod instances;

use clap::{Args, Parser, Subcommand};
use commands::CommandIo;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    /// Malformed config, unreadable files, bad stored data → exit 2.
    Config(String),
    /// A verification check or rate fit failed → exit 1.
    Check(String),
    /// A run aborted on non-finite values or solver breakdown → exit 3.
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Check(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

#[derive(Parser)]
#[command(
    name = "shuffleopt",
    about = "Finite-sum optimizers with shuffled component orders, plus verification and rate estimation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct IoArgs {
    /// Flat key-value config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Replace the configured seed(s) with a single seed.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a configured run and write its trajectory files.
    Run(IoArgs),
    /// Run the inequality suite over a fresh or stored trajectory.
    Verify(IoArgs),
    /// Sweep problems × step decays × seeds and fit empirical rates.
    Rates(IoArgs),
    /// List the built-in problems and their config keys.
    ListProblems,
}

impl From<&IoArgs> for CommandIo {
    fn from(a: &IoArgs) -> Self {
        CommandIo {
            config: a.config.clone(),
            out: a.out.clone(),
            jobs: a.jobs,
            seed_override: a.seed_override,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => commands::cmd_run(&args.into()),
        Command::Verify(args) => commands::cmd_verify(&args.into()),
        Command::Rates(args) => commands::cmd_rates(&args.into()),
        Command::ListProblems => {
            commands::cmd_list_problems();
            Ok(())
        }
    };
    if let Err(err) = result {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}
