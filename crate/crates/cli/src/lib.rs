//! Driver for the `ortho` binary: config loading, the check suite and the
//! `solve` / `verify` / `sweep` commands.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod suite;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Outcome;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ortho", version, about = "Solve and verify the regularized orthotropic p-Laplacian")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config and the ORTHO_OUT variable.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for reductions and sweep jobs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Use sequential reductions.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Solve on every configured grid and write the fields.
    Solve,
    /// Solve and run the enabled checks; exit 1 if any fails.
    Verify,
    /// Run the checks over every (grid, eps) point and draw plots.
    Sweep,
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("`--threads` must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let exp = config::load(path)?.resolve(cli.out.clone(), cli.deterministic)?;
    match cli.command {
        Command::Solve => commands::cmd_solve(&exp),
        Command::Verify => commands::cmd_verify(&exp),
        Command::Sweep => commands::cmd_sweep(&exp),
    }
}

pub fn run(cli: Cli) -> ExitCode {
    match execute(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("ortho: {e}");
            e.exit_code()
        }
    }
}
