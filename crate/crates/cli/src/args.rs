use std::path::PathBuf;

use causal_kit::sampling::DEFAULT_SEED;
use causal_kit::trial::Schedule;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "causal-kit", version, about = "Structural causal models, effect estimation and adaptive trials")]
pub struct Cli {
    /// Seed for every random draw; falls back to CAUSAL_KIT_SEED, then 42.
    #[arg(long, global = true, env = "CAUSAL_KIT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a model file and report diagnostics.
    Validate { model: PathBuf },
    /// Draw rows from a model, optionally under interventions or evidence.
    Sample(SampleArgs),
    /// Exact distribution of target variables by enumeration.
    Exact(ExactArgs),
    /// Exact average treatment effect of a discrete model.
    Ate(AteArgs),
    /// Estimate an effect from a CSV dataset.
    Estimate(EstimateArgs),
    /// Simulate an adaptive trial against a model.
    Trial(TrialArgs),
    /// Run a registered experiment and print one line per check.
    Repro(ReproArgs),
}

/// `name=value`
pub fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(format!("missing variable name in `{s}`"));
    }
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number", value.trim()))?;
    Ok((name.to_string(), value))
}

fn parse_schedule(s: &str) -> Result<Schedule, String> {
    s.parse::<Schedule>().map_err(|e| e.to_string())
}

fn parse_ratio(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected T:C, got `{s}`"))?;
    let n = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("`{v}` is not a count"));
    Ok((n(a)?, n(b)?))
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    pub model: PathBuf,
    /// Number of rows (accepted rows when conditioning).
    #[arg(short = 'n', long = "rows", default_value_t = 1000)]
    pub n: usize,
    /// Set a node by surgery before sampling.
    #[arg(long = "do", value_parser = parse_assignment)]
    pub interventions: Vec<(String, f64)>,
    /// Keep only rows with this value (rejection sampling).
    #[arg(long, value_parser = parse_assignment)]
    pub given: Vec<(String, f64)>,
    /// Draw budget for rejection sampling.
    #[arg(long, default_value_t = 10_000_000)]
    pub max_draws: usize,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    pub model: PathBuf,
    #[arg(long, required = true, value_delimiter = ',')]
    pub target: Vec<String>,
    #[arg(long, value_parser = parse_assignment)]
    pub given: Vec<(String, f64)>,
    #[arg(long = "do", value_parser = parse_assignment)]
    pub interventions: Vec<(String, f64)>,
}

#[derive(Debug, Args)]
pub struct AteArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub action: String,
    #[arg(long)]
    pub outcome: String,
    #[arg(long, default_value_t = 1.0)]
    pub treated: f64,
    #[arg(long, default_value_t = 0.0)]
    pub control: f64,
    /// Condition on covariate values (conditional ATE).
    #[arg(long, value_parser = parse_assignment)]
    pub given: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Regression,
    Naive,
    Ols,
    Ipw,
    Dr,
    Matching,
    Iv,
    Did,
    Rdd,
    Dml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PropensityArg {
    Table,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutcomeArg {
    Table,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceArg {
    Euclidean,
    Manhattan,
    Chebyshev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectionArg {
    Random,
    RoundRobin,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(value_enum)]
    pub method: MethodArg,
    pub data: PathBuf,
    #[arg(long)]
    pub action: Option<String>,
    #[arg(long)]
    pub outcome: String,
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    pub treated: f64,
    #[arg(long, default_value_t = 0.0)]
    pub control: f64,
    /// Bootstrap replicates for a standard error (0 disables).
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,

    /// Propensity model for ipw and dr.
    #[arg(long, value_enum, default_value_t = PropensityArg::Table)]
    pub propensity: PropensityArg,
    /// Additive smoothing for table propensities.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Propensities are clipped to [clip, 1 - clip].
    #[arg(long, default_value_t = causal_kit::estimators::DEFAULT_CLIP)]
    pub clip: f64,
    /// Outcome model for regression and dr.
    #[arg(long, value_enum, default_value_t = OutcomeArg::Table)]
    pub outcome_model: OutcomeArg,

    /// Draws per row as TREATED:CONTROL.
    #[arg(long, value_parser = parse_ratio, default_value = "1:1")]
    pub ratio: (usize, usize),
    /// Match within this distance instead of exactly.
    #[arg(long)]
    pub match_epsilon: Option<f64>,
    #[arg(long, value_enum, default_value_t = DistanceArg::Euclidean)]
    pub distance: DistanceArg,
    #[arg(long, value_enum, default_value_t = SelectionArg::Random)]
    pub selection: SelectionArg,

    #[arg(long)]
    pub instrument: Option<String>,
    /// Impute missing instrument values from the action.
    #[arg(long)]
    pub impute_instrument: bool,
    /// First-stage R² below which the instrument counts as weak.
    #[arg(long, default_value_t = 0.01)]
    pub r2_floor: f64,

    /// Pre-period outcome column for did (--outcome is the post period).
    #[arg(long)]
    pub pre: Option<String>,

    /// Running variable for rdd.
    #[arg(long)]
    pub running: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = f64::INFINITY)]
    pub bandwidth: f64,
    #[arg(long, default_value_t = 1)]
    pub degree: usize,

    /// Cross-fitting folds for dml.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Marginal,
    Conditional,
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    pub model: PathBuf,
    #[arg(long, default_value = "a")]
    pub action: String,
    #[arg(long, default_value = "y")]
    pub outcome: String,
    /// Covariates revealed before each action.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    #[arg(long)]
    pub steps: u64,
    /// Exploration rate: step:T, const:c or geom:start,decay,floor.
    #[arg(long, value_parser = parse_schedule, default_value = "const:1")]
    pub schedule_eps: Schedule,
    /// Boltzmann temperature; const:inf is uniform, const:0 is greedy.
    #[arg(long, value_parser = parse_schedule, default_value = "const:inf")]
    pub schedule_beta: Schedule,
    /// Exponential moving average with this weight on the old estimate.
    #[arg(long)]
    pub ema: Option<f64>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Marginal)]
    pub policy: PolicyArg,
    /// Also write the step log as CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproArgs {
    /// Experiment id, or `all`.
    #[arg(required_unless_present = "list")]
    pub id: Option<String>,
    /// List registered experiments.
    #[arg(long)]
    pub list: bool,
}
