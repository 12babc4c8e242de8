use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ms2gd",
    version,
    about = "mS2GD experiments, rate planning and speedup curves"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run solvers over seeds and write trace CSVs plus a manifest.
    Train(TrainArgs),
    /// Print the work-minimizing (h, m) for a target rate.
    Plan(PlanArgs),
    /// Sweep the planner over batch sizes 1..=b-max.
    Speedup(SpeedupArgs),
    /// Solve to high accuracy with proximal gradient descent.
    Reference(ReferenceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Logistic,
    Ridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegArg {
    None,
    L1,
    L2,
    En,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Where the data comes from and which objective is built on it.
#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// LibSVM file.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub dataset: Option<PathBuf>,

    /// Synthetic data: `n=500,d=20,seed=1,noise=0.1,condition=1`
    /// (the first bare values are read as n, d, seed).
    #[arg(long)]
    pub synthetic: Option<String>,

    #[arg(long, value_enum, default_value = "logistic")]
    pub loss: LossArg,

    #[arg(long, value_enum, default_value = "l2")]
    pub reg: RegArg,

    /// Weight of the regularizer (the l1 part for `en`). Defaults to 1/n.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// l2 weight of the elastic net.
    #[arg(long, default_value_t = 0.0)]
    pub lambda2: f64,

    /// Extra `(w/2)‖x‖²` added to every smooth component.
    #[arg(long, default_value_t = 0.0)]
    pub l2_smooth: f64,

    /// Scale every dataset row to unit norm after loading.
    #[arg(long)]
    pub normalize: bool,

    /// Map label 0 to -1 when reading a dataset.
    #[arg(long)]
    pub zero_one_labels: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    /// `ms2gd:b=8,h=0.1,m=1000`, `ms2gd:b=8,auto`, `s2gd:h=0.1,m=1000` or
    /// `sgd:b=1,h=0.05[,passes=30]`. Repeatable.
    #[arg(long = "solver", required = true)]
    pub solvers: Vec<String>,

    /// Outer iterations for mS2GD; default pass budget for SGD.
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,

    /// Repeatable; every solver runs once per seed.
    #[arg(long = "seed", default_values_t = [0u64])]
    pub seeds: Vec<u64>,

    #[arg(long)]
    pub out_dir: PathBuf,

    /// Target per-epoch contraction for `auto` solvers.
    #[arg(long)]
    pub rho_target: Option<f64>,

    /// Upper bound on the planned inner-loop length. Defaults to 10·n.
    #[arg(long)]
    pub m_cap: Option<u64>,

    /// JSON written by the `reference` subcommand.
    #[arg(long, conflicts_with = "reference_tol")]
    pub reference: Option<PathBuf>,

    /// Compute the reference in-process with this tolerance.
    #[arg(long)]
    pub reference_tol: Option<f64>,

    /// Fill the `seconds` column with wall-clock times (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,

    /// Run configurations that violate the convergence conditions anyway.
    #[arg(long)]
    pub allow_infeasible: bool,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub rho_target: f64,

    #[arg(long = "batch", short = 'b')]
    pub batch: usize,

    #[arg(long)]
    pub n: usize,

    #[arg(long = "lipschitz", short = 'L', default_value_t = 1.0)]
    pub lipschitz: f64,

    #[arg(long)]
    pub mu: f64,

    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SpeedupArgs {
    #[arg(long)]
    pub rho_target: f64,

    #[arg(long)]
    pub n: usize,

    #[arg(long = "lipschitz", short = 'L', default_value_t = 1.0)]
    pub lipschitz: f64,

    #[arg(long)]
    pub mu: f64,

    /// Largest batch size; defaults to n.
    #[arg(long)]
    pub b_max: Option<usize>,

    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ReferenceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,

    /// Stop once successive objective values differ by at most this.
    #[arg(long)]
    pub tol: f64,

    #[arg(long, default_value_t = 1_000_000)]
    pub max_iters: usize,

    /// Receives `reference.json` and `xstar.txt`.
    #[arg(long)]
    pub out_dir: PathBuf,
}
