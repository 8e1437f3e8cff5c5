//! `pmaflow` command line.
//!
//! Exit status: 0 when the checked property holds, 2 when it fails, 1 on error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::Config;
use crate::output::OutDir;

#[derive(Parser)]
#[command(name = "pmaflow", version, about = "Parabolic complex Monge-Ampère flows on pseudoconvex domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the flow; write snapshots, a run report and plot data.
    Solve,
    /// Solve the stationary Dirichlet problem of the limit data.
    Elliptic,
    /// Measure the distance to the stationary solution over time.
    Converge,
    /// Build and verify a sub/superbarrier pair.
    Barriers,
    /// Sup/inf-convolve a run in time and check its Lipschitz bound.
    Regularize,
    /// Search for an admissibility witness of the initial data.
    Admissible,
    /// Fit Hölder moduli of a run and optionally test a restart seam.
    Analyze,
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => anyhow::bail!("--config <path> is required"),
    };
    let out = OutDir::new(&cli.out)?;
    let ctx = Ctx { cfg: &cfg, out: &out, seed: cfg.seed(cli.seed) };
    match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Elliptic => commands::elliptic(&ctx),
        Command::Converge => commands::converge(&ctx),
        Command::Barriers => commands::barriers(&ctx),
        Command::Regularize => commands::regularize(&ctx),
        Command::Admissible => commands::admissible(&ctx),
        Command::Analyze => commands::analyze(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("property check failed; see {}", cli.out.display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
