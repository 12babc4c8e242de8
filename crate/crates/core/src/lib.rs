//! Mini-batch semi-stochastic proximal gradient descent (mS2GD).
//!
//! The crate solves strongly convex composite problems
//! `min_x P(x) = (1/n) Σ f_i(x) + R(x)` where every `f_i` is smooth and `R`
//! is a simple convex regularizer with a closed-form proximal operator.
//!
//! Modules:
//!
//! - [`problem`]: the composite objective, concrete losses and regularizers.
//! - [`sampling`]: seeded mini-batch selection and the inner-loop length law.
//! - [`solver`]: mS2GD itself plus the prox-SGD and prox-GD baselines.
//! - [`theory`]: convergence-rate evaluation and the `(h, m)` planner.
//! - [`data`]: LibSVM ingestion, synthetic generators, row normalization.
//! - [`format`]: `%.17g`-style number rendering shared by every text output.

pub mod data;
pub mod format;
pub mod problem;
pub mod sampling;
pub mod solver;
pub mod theory;

pub use data::{LabeledDataset, SparseRow, SyntheticSpec, Task};
pub use problem::{CompositeProblem, Constants, L2Placement, Loss, Regularizer};
pub use sampling::{alpha, InnerLoopDistribution, MinibatchSampler, RngState};
pub use solver::{EpochRecord, RunTrace, SgdConfig, SolverConfig};
pub use theory::{Plan, RateInputs, Regime, SpeedupCurve};
