use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mcox_core::data::CovariatePathSpec;
use mcox_sim::{CovariateKind, EstimatorKind};

#[derive(Debug, Parser)]
#[command(name = "mcox", version, about = "Cox regression on large data with moment-assisted subsampling")]
pub struct Cli {
    /// Worker threads (defaults to available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory for result.json and friends.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Whole-data partial likelihood fit.
    Fit(FitArgs),
    /// Moment-assisted subsampling estimate (UNI, MCox and optionally OSES).
    Mcox(McoxArgs),
    /// Monte Carlo study on a simulated design.
    Simulate(SimulateArgs),
    /// Wall-time benchmark over a grid of sample sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "time")]
    pub time: String,
    #[arg(long, default_value = "status")]
    pub status: String,
    /// Comma-separated feature columns.
    #[arg(long, value_delimiter = ',', required = true)]
    pub features: Vec<String>,
    /// Covariate path: `constant`, `poly:1,2t,...` or `poly-sum:1,t`.
    #[arg(long, default_value = "constant")]
    pub path: CovariatePathSpec,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Debug, Args)]
pub struct NewtonArgs {
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    /// Stop when the largest score component is at most this.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub newton: NewtonArgs,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct McoxArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub newton: NewtonArgs,
    /// Expected subsample size.
    #[arg(long)]
    pub r: usize,
    /// Expected pilot size; defaults to ⌈r^{2/3} ln r⌉.
    #[arg(long)]
    pub r0: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// `opt`, `aft`, or `linear:FILE` with FILE a headerless CSV matrix.
    #[arg(long, default_value = "opt")]
    pub moment: String,
    #[arg(long)]
    pub with_oses: bool,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// `ti` (time-independent) or `td` (time-dependent).
    #[arg(long, default_value = "ti")]
    pub covariate: CovariateKind,
    /// Comma-separated subsample sizes.
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    pub r: Vec<usize>,
    #[arg(long)]
    pub r0: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated subset of whole, uni, mcox-opt, mcox-app, oses.
    #[arg(long, value_delimiter = ',', default_value = "uni,mcox-opt,mcox-app,oses")]
    pub estimators: Vec<EstimatorKind>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub newton: NewtonArgs,
    /// Also write the first replication's dataset to this CSV file.
    #[arg(long)]
    pub write_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated sample sizes, at least two.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub r: usize,
    #[arg(long, default_value = "ti")]
    pub covariate: CovariateKind,
    #[arg(long, value_delimiter = ',', default_value = "whole,uni,mcox-opt,mcox-app")]
    pub estimators: Vec<EstimatorKind>,
    #[arg(long, default_value_t = mcox_sim::bench::DEFAULT_REPEATS)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated subsample sizes for timing the subsample-fit phase at the smallest n.
    #[arg(long, value_delimiter = ',')]
    pub r_grid: Vec<usize>,
}
