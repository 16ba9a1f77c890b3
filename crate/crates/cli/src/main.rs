mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "yieldopt", version, about = "Threshold allocation between guaranteed contracts and an ad exchange")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize thresholds for a reward distribution.
    Thresholds(ThresholdsArgs),
    /// Run the threshold policy over an instance, one CSV row per seed.
    Simulate(SimulateArgs),
    /// Generate an instance as JSON.
    Gen(GenArgs),
    /// Reference values: offline and online optima, adversary profile.
    Oracle(OracleArgs),
    /// Competitive ratio for the binary distribution.
    Ratio(RatioArgs),
    /// Worst-case distributions at a fixed mean.
    Worstcase(WorstcaseArgs),
    /// Perturbed-Greedy trials on triangular instances, one CSV row per trial.
    Matching(MatchingArgs),
    /// Run a named acceptance experiment (or `all`) and report pass/fail.
    Repro(ReproArgs),
}

#[derive(Args)]
pub struct ThresholdsArgs {
    /// Distribution JSON file, or inline JSON.
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub penalty: Option<f64>,
    #[arg(long)]
    pub supply: Option<f64>,
    /// Grid spacing; defaults to 1/200.
    #[arg(long)]
    pub grid: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub penalty: Option<f64>,
    /// Supply factor used for threshold optimization when the instance declares none.
    #[arg(long)]
    pub supply: Option<f64>,
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Root seed (required unless the config lists seeds).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid spacing; defaults to 1/m for an instance with m advertisers.
    #[arg(long)]
    pub grid: Option<f64>,
    /// Fixed thresholds, comma separated, instead of optimizing.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional JSON summary with reference values.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum InstanceKind {
    Triangular,
    Complete,
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: InstanceKind,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub supply: f64,
    /// Permutation seed (triangular).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Arrival blocks (complete).
    #[arg(long, default_value_t = 1)]
    pub groups: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OracleMode {
    OptFormula,
    OptExact,
    OnlineExact,
    Beta,
}

#[derive(Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub mode: OracleMode,
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub penalty: Option<f64>,
    #[arg(long)]
    pub supply: Option<f64>,
    /// Total demand N (opt-formula, beta).
    #[arg(long)]
    pub demand: Option<f64>,
    /// Reward sampling seed (opt-exact without --rewards).
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON array of per-query rewards (opt-exact).
    #[arg(long)]
    pub rewards: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Discretization (beta).
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RatioArgs {
    #[arg(long)]
    pub supply: f64,
    #[arg(long)]
    pub q: f64,
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub penalty: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct WorstcaseArgs {
    #[arg(long)]
    pub mean: f64,
    #[arg(long)]
    pub penalty: f64,
    #[arg(long)]
    pub supply: f64,
    #[arg(long)]
    pub grid: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct MatchingArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    /// Integer supply factor.
    #[arg(long)]
    pub supply: u32,
    #[arg(long)]
    pub trials: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON array of advertiser weights; unit weights when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReproArgs {
    /// Experiment name, or `all`.
    pub name: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result: Result<ExitCode, CliError> = match cli.command {
        Command::Thresholds(a) => commands::thresholds(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Gen(a) => commands::gen(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Ratio(a) => commands::ratio(a),
        Command::Worstcase(a) => commands::worstcase(a),
        Command::Matching(a) => commands::matching(a),
        Command::Repro(a) => commands::repro(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
