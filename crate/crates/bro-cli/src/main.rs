//! Experiment harness CLI.
//!
//! Every subcommand reads one TOML experiment config and writes
//! `<out>/<subcommand>_<confighash>.csv` plus `<out>/summary.json`. Outputs
//! are byte-identical for a fixed (config, seed), independent of `--workers`.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use bro::harness::{self, ExperimentConfig, Resolved, RunOutput};

#[derive(Parser)]
#[command(
    name = "bro",
    about = "Bayesian risk optimization: replication studies over posterior-risk objectives",
    version
)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed override; mandatory here or in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for replication fan-out.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Objective and argmin-set errors across the n ladder.
    Consistency,
    /// √n-scaled pointwise errors against their normal limits.
    Normality,
    /// Confidence-interval coverage of the true objective.
    Coverage,
    /// √n-scaled optimal-value errors (unique-minimizer problems only).
    OptimalValue,
    /// One end-to-end posterior-risk solve.
    Solve,
    /// Apply the configured risk specs to a sample file.
    RiskEval {
        /// Whitespace-separated numbers.
        #[arg(long)]
        samples: PathBuf,
    },
}

fn resolve(cli: &Cli) -> Result<Resolved> {
    let path = cli.config.as_ref().context("--config <path> is required")?;
    let cfg =
        ExperimentConfig::from_path(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(cfg.resolve(cli.seed)?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        anyhow::ensure!(w >= 1, "--workers must be at least 1");
    }
    let started = Instant::now();
    let resolved = resolve(&cli)?;
    let out = cli.out.as_deref();
    let output: RunOutput = match &cli.command {
        Command::Consistency => harness::cmd_consistency(&resolved, cli.workers, out)?,
        Command::Normality => harness::cmd_normality(&resolved, cli.workers, out)?,
        Command::Coverage => harness::cmd_coverage(&resolved, cli.workers, out)?,
        Command::OptimalValue => harness::cmd_optimal_value(&resolved, cli.workers, out)?,
        Command::Solve => harness::cmd_solve(&resolved, cli.workers, out)?,
        Command::RiskEval { samples } => harness::cmd_risk_eval(&resolved, samples, out)?,
    };
    eprintln!(
        "config {} done in {:.2}s",
        resolved.hash,
        started.elapsed().as_secs_f64()
    );
    println!("{}", output.csv_path.display());
    println!("{}", output.summary_path.display());
    for p in &output.extra_paths {
        println!("{}", p.display());
    }
    Ok(())
}
