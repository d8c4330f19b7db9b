//! `partbias`: forward bias curves, adjustment of LDSC estimates, simulation
//! and mean-shift computation from cohort tables.
//!
//! Every command writes into `--out-dir` and finishes by writing
//! `manifest.json` there, listing input and output digests.

pub mod commands;
pub mod manifest;
pub mod settings;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Environment variable overriding the simulator's genotype-cell budget.
pub const CELL_BUDGET_ENV: &str = "PARTBIAS_CELL_BUDGET";

#[derive(Debug, Parser)]
#[command(name = "partbias", version, about = "Participation bias in heritability and genetic correlation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (`key = value` with `[section]` headers).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed; overrides `seed` in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "partbias-out")]
    pub out_dir: PathBuf,
    /// Jackknife block count; overrides `blocks` in `[ldsc]`.
    #[arg(long, global = true)]
    pub blocks: Option<usize>,
    /// Worker threads for simulation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Apparent heritability and genetic correlations over a parameter grid.
    ForwardCurves,
    /// Adjust LDSC estimates from participant summary statistics.
    Adjust,
    /// Simulate a cohort and write summary statistics, LD scores and truth.
    Simulate,
    /// Observed mean shifts between participant and reference cohort tables.
    Meanshift,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ForwardCurves => "forward-curves",
            Command::Adjust => "adjust",
            Command::Simulate => "simulate",
            Command::Meanshift => "meanshift",
        }
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::ForwardCurves => commands::curves::run(cli),
        Command::Adjust => commands::adjust::run(cli),
        Command::Simulate => commands::simulate::run(cli),
        Command::Meanshift => commands::meanshift::run(cli),
    }
}

/// 3 for failures caused by the numbers (degenerate selection, non-PSD
/// parameters, failed fits), 2 for everything else.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    match e.downcast_ref::<partbias_core::Error>() {
        Some(c) if c.is_numeric() => 3,
        _ => 2,
    }
}

/// One-line JSON error record for stderr.
pub fn error_record(e: &anyhow::Error, code: i32) -> String {
    let kind = e.downcast_ref::<partbias_core::Error>().map(|c| c.kind()).unwrap_or("input");
    serde_json::json!({ "error": kind, "exit_code": code, "message": format!("{e:#}") }).to_string()
}
