//! `flapmech` command-line driver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::Ctx;
use error::{CliError, ExitCode};

#[derive(Parser)]
#[command(name = "flapmech", version, about = "Flapping-mechanism simulation, optimization and tolerance analysis")]
struct Cli {
    /// Worker threads for optimize/robustness (falls back to FLAPMECH_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Run {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a mechanism file and print its constraint report.
    Validate {
        file: PathBuf,
        /// Take limits and solver settings from this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Linkage trace and sweep profile.
    Simulate(Run),
    /// Chord-model coefficients for the mechanism or a harmonic sweep.
    Aero(Run),
    /// Full pipeline: trace, sweep, coefficients and wing loads.
    Evaluate(Run),
    /// Pareto search; resumes from the archive in the output directory.
    Optimize(Run),
    /// Tolerance-band analysis of the nominal design or an archive entry.
    Robustness {
        #[command(flatten)]
        run: Run,
        /// Archive entry id.
        #[arg(long)]
        entry: Option<u64>,
    },
    /// Regenerate plots and print a summary of the output directory.
    Report(Run),
}

fn threads(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("FLAPMECH_THREADS") {
        Ok(s) => s.trim().parse().map_err(|_| CliError::Config(format!("FLAPMECH_THREADS={s:?} is not a count"))),
        Err(_) => Ok(0),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let parallel = matches!(cli.command, Command::Optimize(_) | Command::Robustness { .. });
    let n = if parallel { threads(cli.threads)? } else { 1 };
    // 0 lets rayon pick the core count
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    let open = |r: &Run| Ctx::open(&r.config, r.seed, r.out.as_deref());
    match cli.command {
        Command::Validate { file, config } => commands::validate(&file, config.as_deref()),
        Command::Simulate(r) => commands::simulate(&mut open(&r)?),
        Command::Aero(r) => commands::aero(&mut open(&r)?),
        Command::Evaluate(r) => commands::evaluate(&mut open(&r)?),
        Command::Optimize(r) => commands::optimize(&mut open(&r)?),
        Command::Robustness { run, entry } => commands::robustness(&mut open(&run)?, entry),
        Command::Report(r) => commands::report(&mut open(&r)?),
    }
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::from(ExitCode::Ok as u8),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(e.code() as u8)
        }
    }
}
