//! Library side of the `ms2gd` command-line tool.
//!
//! Subcommands:
//!
//! - `train`: run mS2GD / prox-SGD on a dataset for several seeds, writing
//!   one trace CSV per run, an ideal-parallelism CSV and a JSON manifest.
//! - `plan`: optimal stepsize and inner-loop length for a target rate.
//! - `speedup`: the planner swept over batch sizes, as CSV.
//! - `reference`: a high-accuracy minimizer for gap computation.
//!
//! Exit codes: 0 on success, 1 on runtime failure (divergence, I/O), 2 on
//! usage or validation errors.

pub mod args;
pub mod commands;
pub mod output;
pub mod problem_spec;
pub mod solver_spec;

use std::fmt;

use ms2gd::theory::Infeasibility;

pub use args::Cli;
pub use commands::run;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or values.
    Usage(String),
    /// A solver configuration violates the convergence conditions.
    Infeasible { solver: String, reason: Infeasibility },
    /// Divergence, I/O and other failures after validation.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Infeasible { .. } => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Infeasible { solver, reason } => {
                write!(
                    f,
                    "infeasible hyperparameters for {solver}: {}: {reason}",
                    reason.name()
                )
            }
            CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
