use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "ctmdp", version, about = "Average-reward CTMDP solver and verifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check generator properties, drift and growth conditions
    Validate(ValidateArgs),
    /// Print a builtin's parameter schema and checked conditions, or summarize a model
    Describe(DescribeArgs),
    /// Solve the α-discounted optimality equation
    SolveDiscounted(DiscountedArgs),
    /// Vanishing-discount solve of the average-reward optimality inequalities
    SolveAverage(AverageArgs),
    /// Best deterministic stationary policy by enumeration (or policy iteration)
    Oracle(OracleArgs),
    /// Compare average-reward solutions across truncation levels
    Sensitivity(SensitivityArgs),
    /// Check the upper and lower certificates of a solution
    Verify(VerifyArgs),
    /// Monte Carlo martingale diagnostic for a (policy, h, g) triple
    Martingale(MartingaleArgs),
    /// Event-driven simulation under a fixed policy
    Simulate(SimulateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Describe(_) => "describe",
            Command::SolveDiscounted(_) => "solve-discounted",
            Command::SolveAverage(_) => "solve-average",
            Command::Oracle(_) => "oracle",
            Command::Sensitivity(_) => "sensitivity",
            Command::Verify(_) => "verify",
            Command::Martingale(_) => "martingale",
            Command::Simulate(_) => "simulate",
        }
    }
}

/// Where the model comes from: a JSON file (`-` for stdin) or a builtin.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model file (explicit or builtin form), `-` for stdin, or a report embedding one
    #[arg(long, conflicts_with = "builtin")]
    pub model: Option<String>,
    /// Builtin family name
    #[arg(long)]
    pub builtin: Option<String>,
    /// Builtin parameters: inline JSON object or a path to one
    #[arg(long, requires = "builtin")]
    pub params: Option<String>,
    /// Truncation level N (overrides params)
    #[arg(long)]
    pub truncation: Option<usize>,
    /// Action grid points per interval G (overrides params)
    #[arg(long = "action-grid")]
    pub action_grid: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutputArgs {
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Worker threads for replications (default: all cores)
    #[arg(long, env = "CTMDP_THREADS")]
    #[serde(skip)]
    pub threads: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Drift,
    Bounds,
    Monotone,
}

#[derive(Args, Debug, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    /// Condition groups to evaluate besides the generator checks
    #[arg(long, value_delimiter = ',', default_values = ["drift", "bounds", "monotone"])]
    pub checks: Vec<Check>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct DescribeArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct DiscountedArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iter: usize,
    /// Reference state for the relative values
    #[arg(long, default_value_t = 0)]
    pub x0: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = 0.1)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    #[arg(long, default_value_t = 25)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub x0: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct AverageArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct OracleArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct SensitivityArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    /// Increasing truncation levels
    #[arg(long, value_delimiter = ',', default_values = ["20", "40", "80"])]
    pub levels: Vec<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    /// Report from solve-average (or its result object), `-` for stdin
    #[arg(long)]
    pub solution: String,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct MartingaleArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    #[arg(long)]
    pub solution: String,
    /// `star` for the solution's policy, or a policy file / inline JSON
    #[arg(long, default_value = "star")]
    pub policy: String,
    #[arg(long, default_value_t = 200)]
    pub reps: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub x0: usize,
    /// Checkpoint times (default: 8 geometric points on [1, 1000])
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<f64>>,
    /// CSV with columns t, mean, se
    #[arg(long)]
    #[serde(skip)]
    pub emit_series: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Time-averaged reward per replication
    Average,
    /// Mean of w(x(t)) against e^{-ct} w(x0) + b/c
    Lyapunov,
    /// Distance to the stationary mean over time and a fitted decay rate
    Ergodicity,
    /// Small-time regression of E w(x(t)) - w(x0)
    Drift,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub model: ModelArgs,
    /// Policy file / inline JSON, `first` (the default), or a report with a
    /// policy; for Potlach an action object `{"matrix": i, "q": [...]}`
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long, value_enum, default_value_t = Mode::Average)]
    pub mode: Mode,
    /// Initial state: an index (default 0), or comma-separated coordinates
    /// for Potlach (default all ones)
    #[arg(long)]
    pub x0: Option<String>,
    #[arg(long, default_value_t = 1e5)]
    pub horizon: f64,
    #[arg(long, default_value_t = 20)]
    pub reps: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<f64>>,
    /// CSV series: `rep,value` (average) or `t,mean,se,bound` (other modes)
    #[arg(long)]
    #[serde(skip)]
    pub emit_series: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}
