//! Command-line flags and the optional JSON config they override.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "fslm",
    version,
    about = "Functional spatial lag model: simulation, Bayesian and ML fitting, Moran test"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset bundle (curves, response, weights, truth).
    Simulate(SimulateArgs),
    /// Fit a dataset bundle by MCMC and/or maximum likelihood.
    Fit(FitArgs),
    /// Simulate and fit each method for a list of rho values.
    Table1(Table1Args),
    /// Moran's I permutation test on a response.
    Moran(MoranArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NormalKernel,
    UniformKernel,
    Ml,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Normal,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContiguityArg {
    Rook,
    Queen,
}

/// Keys accepted in `--config`; any flag given on the command line wins.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub rho: Option<f64>,
    pub rho_list: Option<Vec<f64>>,
    pub sigma2: Option<f64>,
    pub noise_sd: Option<f64>,
    pub n_iter: Option<usize>,
    pub burn_in: Option<usize>,
    pub kernel: Option<KernelArg>,
    pub tuning_c: Option<f64>,
    pub adapt: Option<bool>,
    pub method: Option<Method>,
    pub basis_count: Option<usize>,
    pub grid: Option<String>,
    pub contiguity: Option<ContiguityArg>,
    pub edges: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub replicates: Option<usize>,
    pub permutations: Option<usize>,
    pub svg: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Ok(fslm::io::read_json(p)?),
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON file with default values for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct LatticeArgs {
    /// Lattice shape, e.g. `11x11`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_enum)]
    pub contiguity: Option<ContiguityArg>,
    /// CSV of undirected edges `i,j`; replaces the lattice.
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    #[arg(long)]
    pub n_iter: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Initial random-walk scale for rho.
    #[arg(long)]
    pub tuning_c: Option<f64>,
    /// Adapt the tuning constant during burn-in (default).
    #[arg(long, overrides_with = "no_adapt")]
    pub adapt: bool,
    #[arg(long, overrides_with = "adapt")]
    pub no_adapt: bool,
    #[arg(long)]
    pub basis_count: Option<usize>,
}

impl SamplerArgs {
    pub fn adapt_flag(&self) -> Option<bool> {
        match (self.adapt, self.no_adapt) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Standard deviation of the white noise added to each curve.
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub basis_count: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Directory holding curves.csv, response.csv and weights.csv.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Shorthand for `--method normal-kernel` or `--method uniform-kernel`.
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Output directory (defaults to the input directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write SVG trace charts.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Comma-separated true rho values.
    #[arg(long, value_delimiter = ',')]
    pub rho_list: Option<Vec<f64>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MoranArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Bundle directory; supplies response.csv and weights.csv.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Response CSV `id,y`.
    #[arg(long)]
    pub response: Option<PathBuf>,
    /// Weight triplets CSV `i,j,w`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub permutations: Option<usize>,
}

/// Parse `RxC` (spaces allowed around `x`).
pub fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("grid must look like 11x11, got {s:?}"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let r: usize = r.trim().parse().map_err(|_| bad())?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    if r == 0 || c == 0 {
        return Err(bad());
    }
    Ok((r, c))
}
