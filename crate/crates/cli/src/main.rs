//! `ddeperiod` command-line tool.
//!
//! Exit codes: 0 on success, 1 when a computation fails (or a check does
//! not pass), 2 for invalid arguments or configuration.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddeperiod_core::Axis;

/// Raised for bad flags or config values; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "ddeperiod",
    version,
    about = "Periodic orbits of x'(t) = a(t) f(x(t-1))"
)]
struct Cli {
    /// TOML file with [params], [smoothing], [integrator], [solve] and [sweep] sections.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate from a constant history and write the trajectory.
    Solve(SolveArgs),
    /// Print the closed-form return map and its conditions.
    Map(ParamArgs),
    /// Check the published parameter table.
    VerifyTable(VerifyArgs),
    /// Classify a parameter grid.
    Sweep(SweepArgs),
    /// Fixed points of the smoothed map over a grid of delta.
    Smooth(SmoothArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub a1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub a2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub p2: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct IntegratorArgs {
    /// Fixed step; 1/step must be an integer. Defaults to min(1e-3, delta/4).
    #[arg(long)]
    pub step: Option<f64>,
    /// Dense output between nodes: cubic or linear.
    #[arg(long)]
    pub interpolation: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Constant initial history.
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Smoothing half-width; 0 uses the exact solver.
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    /// Spacing of the rows in trajectory.csv.
    #[arg(long)]
    pub sample_step: Option<f64>,
    /// Directory for trajectory.csv and summary.json.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// CSV with header a1,a2,p1,p2,h_star,T; fractions like 1/3 mark exact rows.
    #[arg(long, value_name = "FILE")]
    pub rows: Option<PathBuf>,
    /// Directory for table_report.json.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Base values for parameters without an axis.
    #[command(flatten)]
    pub params: ParamArgs,
    /// Axis as name=lo:hi:count, e.g. a1=0.5:5:10. Repeatable.
    #[arg(long = "axis", value_name = "SPEC")]
    pub axes: Vec<Axis>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "DDE_JOBS")]
    pub jobs: Option<usize>,
    /// Directory for sweep.csv and sweep.json.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SmoothArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Comma-separated delta grid.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "DDE_JOBS")]
    pub jobs: Option<usize>,
    /// Directory for convergence.json.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<ddeperiod_core::Error>() {
        Some(e) if e.is_usage() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let run = || -> anyhow::Result<u8> {
        let file = config::FileConfig::load(cli.config.as_deref())?;
        match &cli.command {
            Command::Solve(a) => commands::solve(a, &file),
            Command::Map(a) => commands::map(a, &file),
            Command::VerifyTable(a) => commands::verify_table(a),
            Command::Sweep(a) => commands::sweep(a, &file),
            Command::Smooth(a) => commands::smooth(a, &file),
        }
    };
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
