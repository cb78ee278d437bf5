use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "fepls", version, about = "Functional extreme partial least-squares toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a synthetic dataset from the inverse single-index model.
    Simulate(SimulateArgs),
    /// Monte Carlo study of the estimator on the synthetic model.
    Experiment(ExperimentArgs),
    /// Estimate the tail direction of a dataset.
    Fit(FitArgs),
    /// Hill estimates and QQ data for the responses.
    Tail(TailArgs),
    /// Conditional Value-at-Risk curves on the projected covariate.
    Var(VarArgs),
    /// Relative errors of projected versus functional conditional estimates.
    Compare(CompareArgs),
    /// Build a block sample from two minute-price files.
    Ingest(IngestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sim,
    Data,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `rho = -2 gamma`.
    Steep,
    /// `rho = -gamma / 2`.
    Shallow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Quantile,
    TailIndex,
}

/// Every key a configuration file may set. Command-line values win.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
    pub kappa: Option<f64>,
    pub tau: Option<f64>,
    pub hurst: Option<f64>,
    pub mu: Option<f64>,
    pub sigma_fraction: Option<f64>,
    pub noiseless: Option<bool>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub k: Option<usize>,
    pub mode: Option<Mode>,
    pub q: Option<f64>,
    pub alpha: Option<Vec<f64>>,
    pub big_j: Option<usize>,
    pub grid_size: Option<usize>,
    pub bandwidth: Option<f64>,
    pub target: Option<Target>,
    pub replications: Option<usize>,
    pub tau_values: Option<Vec<f64>>,
    pub preset: Option<Preset>,
    pub sweep: Option<bool>,
    pub rate_n: Option<Vec<usize>>,
    pub remove_top: Option<usize>,
    pub swap_roles: Option<bool>,
    pub input: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub direction: Option<PathBuf>,
    pub covariate: Option<PathBuf>,
    pub response: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Configuration file (TOML) that may set any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Tail index of the Burr response.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Second-order parameter of the Burr response.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Link exponent, `g(y) = y^kappa`.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Hurst parameter of the noise.
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Noise mean.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Noise scale as a fraction of `g(y)`.
    #[arg(long)]
    pub sigma_fraction: Option<f64>,
    /// Drop the noise entirely.
    #[arg(long)]
    pub noiseless: bool,
    /// Sample size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Grid size.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SelectArgs {
    /// Test-function exponent, `phi(y) = y^tau`.
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Threshold selection rule: signed (sim) or absolute (data) correlation.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub select: SelectArgs,
    /// Number of Monte Carlo replications.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Several test-function exponents at once.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub tau_values: Option<Vec<f64>>,
    /// How `rho` follows `gamma` when `--rho` is not given.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Run the nine (kappa, gamma) cells of the standard design.
    #[arg(long)]
    pub sweep: bool,
    /// Sample sizes for an additional rate regression.
    #[arg(long, value_delimiter = ',')]
    pub rate_n: Option<Vec<usize>>,
    /// Rate exponent `q`.
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub select: SelectArgs,
    /// Dataset CSV (`y,x_1,...,x_d`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// True index (`t,beta`) to compare against.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Use this `k` instead of the data-driven choice.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct TailArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset CSV; only the `y` column is used.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of top order statistics for the QQ plot.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CondArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Projection direction (`t,value`); estimated with FEPLS when absent.
    #[arg(long)]
    pub direction: Option<PathBuf>,
    /// Risk levels.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    #[arg(long)]
    pub grid_size: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct VarArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub cond: CondArgs,
    #[command(flatten)]
    pub select: SelectArgs,
    /// Kernel bandwidth; the adaptive rule is used when absent.
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub cond: CondArgs,
    #[command(flatten)]
    pub select: SelectArgs,
    /// Number of quantile levels in the functional Hill estimator.
    #[arg(long)]
    pub big_j: Option<usize>,
    #[arg(long, value_enum)]
    pub target: Option<Target>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct IngestArgs {
    #[command(flatten)]
    pub common: Common,
    /// Price file whose blocks become the covariate curves.
    #[arg(long)]
    pub covariate: Option<PathBuf>,
    /// Price file whose block maxima become the responses.
    #[arg(long)]
    pub response: Option<PathBuf>,
    /// Exchange the two roles.
    #[arg(long)]
    pub swap_roles: bool,
    /// Block length in minutes.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of largest responses to discard.
    #[arg(long)]
    pub remove_top: Option<usize>,
}
