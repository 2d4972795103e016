use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bmnn",
    version,
    about = "Third-order tensor completion with BMNN and HaLRTC"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complete one tensor and write the result, an iteration CSV and a manifest.
    Complete(CompleteArgs),
    /// Run one solver configuration per value along a parameter axis.
    Sweep(SweepArgs),
    /// Write a synthetic low-BM-rank tensor, a mask and a manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum SolverKind {
    Bmnn,
    Halrtc,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Bmnn => "bmnn",
            SolverKind::Halrtc => "halrtc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Lambda,
    Mu0,
    Rho,
    SampleRate,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Lambda => "lambda",
            Axis::Mu0 => "mu0",
            Axis::Rho => "rho",
            Axis::SampleRate => "sample_rate",
        }
    }
}

/// Input tensor, observation pattern and run environment.
#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// TensorFile, or a directory of .pgm frames.
    #[arg(long)]
    pub input: PathBuf,
    /// Fraction of entries to observe, drawn with --seed.
    #[arg(long, conflicts_with = "mask", allow_hyphen_values = true)]
    pub mask_rate: Option<f64>,
    /// Seed for the generated mask and for factor initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// 0/1 TensorFile of observed entries.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Divide the data by the largest observed magnitude before solving and
    /// scale the result back.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

/// Solver hyperparameters. Unset values take each solver's defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    /// BM-rank (bmnn only).
    #[arg(long)]
    pub rank: Option<usize>,
    /// Fit weight (bmnn only).
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Initial penalty.
    #[arg(long, allow_hyphen_values = true)]
    pub mu0: Option<f64>,
    /// Penalty growth per iteration.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu_max: Option<f64>,
    /// Nuclear norm weights, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alphas: Option<Vec<f64>>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub tol: Option<f64>,
    /// Inner ALS passes per iteration (bmnn only).
    #[arg(long)]
    pub rals_sweeps: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CompleteArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = SolverKind::Bmnn)]
    pub solver: SolverKind,
    #[command(flatten)]
    pub params: SolverArgs,
    /// Reference tensor for the per-iteration relative error.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// The input doubles as ground truth for the relative error.
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum)]
    pub axis: Axis,
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    pub values: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "bmnn")]
    pub solvers: Vec<SolverKind>,
    #[command(flatten)]
    pub params: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// n1,n2,n3
    #[arg(long, value_delimiter = ',', default_values_t = [30, 30, 30])]
    pub dims: Vec<usize>,
    /// BM-rank of the generated tensor.
    #[arg(long, default_value_t = 3)]
    pub rank: usize,
    /// Matrix rank of each factor slice.
    #[arg(long, default_value_t = 2)]
    pub slice_rank: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rate: f64,
    /// Tensor seed; the mask uses seed + 1.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}
