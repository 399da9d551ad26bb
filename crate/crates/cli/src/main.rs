//! `mfg`: solve, train, benchmark, verify and export mean-field game
//! experiments described by one TOML config.

mod commands;
mod config;
mod run_dir;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mfg_core::fp::SolverMode;

use crate::commands::Injection;
use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "mfg", version, about = "Mean-field game experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact fictitious play for every training and testing distribution.
    SolveExact(Common),
    /// Population-conditioned and unconditioned fictitious play.
    TrainMaster(Common),
    /// Distance and exploitability matrices of every policy family.
    Benchmark(Common),
    /// Self-checks; exits nonzero if any fails.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Corrupt one component to confirm its check catches it.
        #[arg(long, value_enum)]
        inject: Option<InjectArg>,
    },
    /// Flow tables for plotting.
    Export(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's best-response learner.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dqn,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum InjectArg {
    SignFlippedReward,
    TamperedGradient,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(mode) = self.mode {
            cfg.fp.mode = match mode {
                ModeArg::Dqn => SolverMode::Dqn,
                ModeArg::Exact => SolverMode::Exact,
            };
        }
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.out
        .clone()
        .context("no output directory: pass --out or set `out` in the config")
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SolveExact(c) => {
            let cfg = c.resolve()?;
            commands::solve_exact(&cfg, &out_dir(&cfg)?)?;
        }
        Command::TrainMaster(c) => {
            let cfg = c.resolve()?;
            commands::train_master(&cfg, &out_dir(&cfg)?)?;
        }
        Command::Benchmark(c) => {
            let cfg = c.resolve()?;
            commands::benchmark(&cfg, &out_dir(&cfg)?)?;
        }
        Command::Verify { common, inject } => {
            let cfg = common.resolve()?;
            let inject = inject.map(|i| match i {
                InjectArg::SignFlippedReward => Injection::SignFlippedReward,
                InjectArg::TamperedGradient => Injection::TamperedGradient,
            });
            // Only an explicit --out records a report, so checks can be rerun
            // freely against a config that names an output directory.
            return commands::verify(&cfg, common.out.as_deref(), inject);
        }
        Command::Export(c) => {
            let cfg = c.resolve()?;
            commands::export(&cfg, &out_dir(&cfg)?)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
