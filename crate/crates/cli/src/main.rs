//! `interdid` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "interdid", version, about = "Difference-in-differences with neighbor spillover")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a panel and report its shape.
    Validate(ValidateArgs),
    /// Estimate ATT/ATN effects per window.
    Estimate(EstimateArgs),
    /// Pre-period effects for m = 2..n_m.
    Pretrends(PretrendArgs),
    /// Monte Carlo grid over simulation scenarios, or the TWFE demo.
    Simulate(SimulateArgs),
    /// Effects on subgroups of the exposed units.
    Subgroup(SubgroupArgs),
    /// Group-mean outcome trajectories for plotting.
    Trajectories(TrajectoryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimandArg {
    Att,
    Atn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Twfe,
    Or,
    Ipw,
    Dr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsModeArg {
    Invariant,
    PerM,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowsArg {
    Annual,
    Seasonal,
    AllM,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleArg {
    Additive,
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CiArg {
    None,
    Stratified,
    Bayesian,
    Parametric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemoArg {
    TwfeHet,
}

/// Panel file and how to read it.
#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Long-format panel CSV.
    pub input: PathBuf,
    /// Covariate allowed to vary over m.
    #[arg(long)]
    pub varying_covariate: Option<String>,
    /// Columns holding unit labels rather than numeric covariates.
    #[arg(long, value_delimiter = ',')]
    pub label_columns: Vec<String>,
    /// Drop units flagged in the `excluded` column.
    #[arg(long)]
    pub apply_exclusion: bool,
}

/// Model and interval settings shared by the estimation commands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [EstimandArg::Att, EstimandArg::Atn])]
    pub estimand: Vec<EstimandArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Dr])]
    pub method: Vec<MethodArg>,
    #[arg(long, value_enum, default_value_t = PsModeArg::Invariant)]
    pub ps_mode: PsModeArg,
    /// Outcome-trend covariates (default: all).
    #[arg(long, value_delimiter = ',')]
    pub mu_covs: Option<Vec<String>>,
    /// Propensity covariates (default: all).
    #[arg(long, value_delimiter = ',')]
    pub pi_covs: Option<Vec<String>>,
    #[arg(long, value_enum, default_value_t = CiArg::None)]
    pub ci: CiArg,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Write CSV here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = WindowsArg::Annual)]
    pub windows: WindowsArg,
    #[arg(long, value_enum, default_value_t = ScaleArg::Additive)]
    pub scale: ScaleArg,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PretrendArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Preset names (1a..3d) or `all`.
    #[arg(long, value_delimiter = ',')]
    pub scenario: Vec<String>,
    /// Additional scenario definitions in TOML.
    #[arg(long)]
    pub scenario_file: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Twfe, MethodArg::Or, MethodArg::Ipw, MethodArg::Dr])]
    pub methods: Vec<MethodArg>,
    /// Monte Carlo replicates (demo: replicates per design).
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `none` or `stratified`/`bayesian` bootstrap coverage.
    #[arg(long, value_enum, default_value_t = CiArg::None)]
    pub ci: CiArg,
    #[arg(long, default_value_t = 200)]
    pub boot_reps: usize,
    /// Append published reference values to each row.
    #[arg(long)]
    pub compare_paper: bool,
    #[arg(long, value_enum)]
    pub demo: Option<DemoArg>,
    /// Sample size for the demo.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Write one simulated panel of the first scenario here instead of running the grid.
    #[arg(long)]
    pub emit_panel: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SubgroupArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = EstimandArg::Atn)]
    pub estimand: EstimandArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Dr)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = PsModeArg::Invariant)]
    pub ps_mode: PsModeArg,
    #[arg(long, value_delimiter = ',')]
    pub mu_covs: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub pi_covs: Option<Vec<String>>,
    #[arg(long, value_enum, default_value_t = WindowsArg::Annual)]
    pub windows: WindowsArg,
    #[arg(long, value_enum, default_value_t = ScaleArg::Relative)]
    pub scale: ScaleArg,
    #[arg(long, value_enum, default_value_t = CiArg::None)]
    pub ci: CiArg,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Edge list CSV `taxed_zone,neighbor_zone`.
    #[arg(long, requires_all = ["zone_measures", "zone_column"], conflicts_with = "filter_column")]
    pub adjacency: Option<PathBuf>,
    /// Zone measures CSV `zone,population,yty_diff`.
    #[arg(long, requires = "adjacency")]
    pub zone_measures: Option<PathBuf>,
    /// Label column giving each unit's zone.
    #[arg(long, requires = "adjacency")]
    pub zone_column: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Write the zone-to-cluster assignment here.
    #[arg(long)]
    pub assignments: Option<PathBuf>,
    /// Label column defining the subgroups.
    #[arg(long)]
    pub filter_column: Option<String>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(a) => commands::validate(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Pretrends(a) => commands::pretrends(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Subgroup(a) => commands::subgroup(a),
        Command::Trajectories(a) => commands::trajectories(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
