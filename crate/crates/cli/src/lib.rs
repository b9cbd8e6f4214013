//! `spotscale` command line: argument parsing, dispatch and error mapping.

mod commands;
mod manifest;
mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use manifest::{InputDigest, RunManifest, MANIFEST_FILE};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  usage, io, parse or validation error
  2  infeasible: no sustainable load, pod fits no node, no feasible allocation, empty front

Errors are printed to stderr as a single line `ERROR: <category>: <detail>`.";

#[derive(Debug, Parser)]
#[command(name = "spotscale", version, about = "Spot-instance cluster sizing, optimization and simulation", after_help = EXIT_CODES)]
struct Cli {
    /// Seed for every stochastic component.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (required by simulate and compare).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress the human-readable report on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Find max sustainable rps per pod and the initial pod count.
    Characterize(CharacterizeArgs),
    /// Fit a price model to a trace and forecast the following hours.
    Forecast(ForecastArgs),
    /// Search node combinations for the cost / node-count front.
    Optimize(OptimizeArgs),
    /// Run one policy over a scenario.
    Simulate(SimulateArgs),
    /// Run the elastic policy and the baselines over a scenario.
    Compare(CompareArgs),
    /// Re-execute the run recorded in a manifest.
    #[serde(skip)]
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CharacterizeArgs {
    #[arg(long)]
    pub loadtest: PathBuf,
    #[arg(long)]
    pub slo_rps: f64,
    #[arg(long, default_value_t = 2.0)]
    pub failure_threshold: f64,
    #[arg(long, default_value_t = 5.0)]
    pub cpu_drop: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ForecastArgs {
    #[arg(long)]
    pub history: PathBuf,
    #[arg(long = "type")]
    pub instance_type: String,
    #[arg(long)]
    pub zone: String,
    #[arg(long, default_value_t = 24)]
    pub horizon: u32,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub pods: u32,
    #[arg(long, default_value_t = 500)]
    pub pod_cpu: u32,
    #[arg(long, default_value_t = 1024)]
    pub pod_mem: u64,
    /// Price trace file, or `on-demand` for catalog prices.
    #[arg(long)]
    pub prices: String,
    /// Price at this instant (ISO-8601); defaults to the latest observation.
    #[arg(long)]
    pub at: Option<String>,
    /// Quote the next-hour forecast mean instead of the observed price.
    #[arg(long)]
    pub forecast: bool,
    #[arg(long, default_value = "nsga2")]
    pub algo: String,
    #[arg(long, default_value_t = 1)]
    pub min_nodes: u32,
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
    #[arg(long, default_value_t = spotscale::optimize::DEFAULT_MAX_PER_TYPE)]
    pub max_per_type: u32,
    #[arg(long, default_value_t = 0.0)]
    pub fixed_overhead: f64,
    #[arg(long, default_value_t = 64)]
    pub population: usize,
    #[arg(long, default_value_t = 100)]
    pub generations: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value = "elastic")]
    pub policy: String,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub scenario: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

/// A failure with its report category and exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub category: &'static str,
    pub detail: String,
    pub code: i32,
}

impl CliError {
    pub fn new(category: &'static str, detail: impl Into<String>) -> Self {
        let code = if category == "infeasible" { 2 } else { 1 };
        CliError {
            category,
            detail: detail.into(),
            code,
        }
    }
}

/// Effective settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Global {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn dispatch<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let first = e.to_string();
                    let first = first.lines().next().unwrap_or("").trim_start_matches("error: ");
                    let _ = writeln!(stderr, "ERROR: usage: {first}");
                    1
                }
            };
        }
    };
    let global = Global {
        seed: cli.seed,
        out: cli.out,
        quiet: cli.quiet,
    };
    match commands::execute(&cli.command, &global, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let detail = e.detail.replace('\n', " ");
            let _ = writeln!(stderr, "ERROR: {}: {}", e.category, detail);
            e.code
        }
    }
}
