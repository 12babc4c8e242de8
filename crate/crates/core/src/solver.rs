//! mS2GD and its baselines.
//!
//! Every solver returns a [`RunTrace`] with one [`EpochRecord`] per outer
//! iteration (or per effective pass for SGD), counting component-gradient
//! evaluations so runs can be compared on a work axis.
//!
//! Randomness: mini-batches are drawn from stream 0 and inner-loop lengths
//! from stream 1 of the same seed, so runs that differ only in `b` share
//! their inner-length uniforms.

use web_time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{CompositeProblem, ProblemError};
use crate::sampling::{InnerLoopDistribution, MinibatchSampler, RngState, SamplingError};
use crate::theory::{Infeasibility, RateInputs};

const BATCH_STREAM: u64 = 0;
const LENGTH_STREAM: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("diverged at epoch {epoch}: objective or iterate is not finite")]
    Diverged { epoch: usize },
    #[error("index {index} out of range for {n} components")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("mini-batch must be nonempty with distinct indices")]
    InvalidBatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// mS2GD hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Maximum number of inner steps per epoch, `m`.
    pub inner_max: usize,
    pub stepsize: f64,
    pub batch: usize,
    /// Number of outer iterations, `K`.
    pub epochs: usize,
    pub seed: u64,
    /// Starting point; zeros when absent.
    pub x0: Option<Vec<f64>>,
}

impl SolverConfig {
    pub fn rate_inputs(&self, problem: &CompositeProblem) -> RateInputs {
        let c = problem.constants();
        RateInputs {
            stepsize: self.stepsize,
            inner_max: self.inner_max,
            batch: self.batch,
            n: problem.n(),
            lipschitz: c.lipschitz,
            mu: c.mu,
            nu_f: c.nu_f,
            nu_r: c.nu_r,
        }
    }

    /// Whether the configuration satisfies the conditions of the linear
    /// convergence guarantee. Reported only; runs are never refused.
    pub fn feasibility(&self, problem: &CompositeProblem) -> Result<(), Infeasibility> {
        self.rate_inputs(problem).check()
    }
}

/// Constant-stepsize mini-batch prox-SGD settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    /// `0` leaves the iterate unchanged.
    pub stepsize: f64,
    pub batch: usize,
    pub steps: usize,
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    /// `P(x) - P(x*)` when a reference value was supplied.
    pub gap: Option<f64>,
    /// Cumulative component-gradient evaluations.
    pub evaluations: u64,
    /// Part of `evaluations` spent inside mini-batch steps.
    pub inner_evaluations: u64,
    /// Inner steps taken in this epoch (`t_k`).
    pub inner_steps: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub n: usize,
    pub batch: usize,
    pub records: Vec<EpochRecord>,
    pub x_final: Vec<f64>,
}

impl RunTrace {
    /// Effective passes `evaluations / n` after each record.
    pub fn effective_passes(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.evaluations as f64 / self.n as f64)
            .collect()
    }

    /// Passes if every mini-batch were evaluated in parallel on `b` workers:
    /// inner-step evaluations are divided by `b`.
    pub fn ideal_parallel_passes(&self) -> Vec<f64> {
        let b = self.batch as f64;
        self.records
            .iter()
            .map(|r| {
                let outer = (r.evaluations - r.inner_evaluations) as f64;
                (outer + r.inner_evaluations as f64 / b) / self.n as f64
            })
            .collect()
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }

    /// First effective-pass count at which the gap is at most `target`.
    pub fn passes_to_gap(&self, target: f64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.gap.is_some_and(|g| g <= target))
            .map(|r| r.evaluations as f64 / self.n as f64)
    }
}

/// Mini-batch variance-reduced direction at `y` around snapshot `x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReducedEstimate<'a> {
    pub v: Vec<f64>,
    pub snapshot_gradient: &'a [f64],
    pub snapshot: &'a [f64],
}

/// `v = g_k + (1/b) Σ_{i∈A} (∇f_i(y) - ∇f_i(x_k))`, with `A` 0-based.
pub fn estimate_direction<'a>(
    problem: &CompositeProblem,
    snapshot_gradient: &'a [f64],
    snapshot: &'a [f64],
    y: &[f64],
    batch: &[usize],
) -> Result<VarianceReducedEstimate<'a>, SolverError> {
    let n = problem.n();
    if let Some(&index) = batch.iter().find(|&&i| i >= n) {
        return Err(SolverError::IndexOutOfRange { index, n });
    }
    let mut sorted = batch.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() || sorted.len() != batch.len() {
        return Err(SolverError::InvalidBatch);
    }
    for v in [snapshot_gradient, snapshot, y] {
        if v.len() != problem.dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: problem.dim(),
                got: v.len(),
            }
            .into());
        }
    }
    let mut v = vec![0.0; problem.dim()];
    direction_into(problem, snapshot_gradient, snapshot, y, batch, &mut v);
    Ok(VarianceReducedEstimate {
        v,
        snapshot_gradient,
        snapshot,
    })
}

fn direction_into(
    problem: &CompositeProblem,
    snapshot_gradient: &[f64],
    snapshot: &[f64],
    y: &[f64],
    batch: &[usize],
    out: &mut [f64],
) {
    out.copy_from_slice(snapshot_gradient);
    let scale = 1.0 / batch.len() as f64;
    let components = problem.components();
    for &i in batch {
        components.add_gradient(i, y, scale, out);
        components.add_gradient(i, snapshot, -scale, out);
    }
}

fn start_point(problem: &CompositeProblem, x0: &Option<Vec<f64>>) -> Result<Vec<f64>, SolverError> {
    match x0 {
        Some(x) if x.len() != problem.dim() => Err(ProblemError::DimensionMismatch {
            expected: problem.dim(),
            got: x.len(),
        }
        .into()),
        Some(x) => Ok(x.clone()),
        None => Ok(vec![0.0; problem.dim()]),
    }
}

struct Recorder {
    reference: Option<f64>,
    started: Instant,
    records: Vec<EpochRecord>,
}

impl Recorder {
    fn new(reference: Option<f64>) -> Self {
        Recorder {
            reference,
            started: Instant::now(),
            records: Vec::new(),
        }
    }

    fn push(
        &mut self,
        problem: &CompositeProblem,
        x: &[f64],
        evaluations: u64,
        inner_evaluations: u64,
        inner_steps: u64,
    ) -> Result<(), SolverError> {
        let epoch = self.records.len();
        let objective = problem.objective(x)?;
        if !objective.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Diverged { epoch });
        }
        self.records.push(EpochRecord {
            epoch,
            objective,
            gap: self.reference.map(|p| objective - p),
            evaluations,
            inner_evaluations,
            inner_steps,
            seconds: self.started.elapsed().as_secs_f64(),
        });
        Ok(())
    }
}

/// Runs mS2GD for `cfg.epochs` outer iterations.
///
/// Each epoch computes the full gradient at the snapshot, draws an inner
/// length `t_k` from [`InnerLoopDistribution`], takes `t_k` proximal steps
/// along the variance-reduced direction and restarts from the last inner
/// iterate. Work per epoch is `n + 2 b t_k` gradient evaluations: snapshot
/// component gradients are recomputed, not stored.
pub fn run_ms2gd(
    problem: &CompositeProblem,
    cfg: &SolverConfig,
    reference: Option<f64>,
) -> Result<RunTrace, SolverError> {
    let n = problem.n();
    let d = problem.dim();
    if cfg.batch == 0 || cfg.batch > n {
        return Err(SamplingError::BatchOutOfRange { n, b: cfg.batch }.into());
    }
    let constants = problem.constants();
    let lengths = InnerLoopDistribution::new(cfg.inner_max, cfg.stepsize, constants.nu_f, constants.nu_r)?;
    let reg = problem.regularizer();
    let h = cfg.stepsize;

    let mut batch_rng = RngState::with_stream(cfg.seed, BATCH_STREAM);
    let mut length_rng = RngState::with_stream(cfg.seed, LENGTH_STREAM);
    let mut sampler = MinibatchSampler::new(n);

    let mut x = start_point(problem, &cfg.x0)?;
    let mut y = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut evaluations = 0u64;
    let mut inner_evaluations = 0u64;

    let mut recorder = Recorder::new(reference);
    recorder.push(problem, &x, 0, 0, 0)?;

    for _ in 0..cfg.epochs {
        problem.full_gradient_into(&x, &mut g)?;
        evaluations += n as u64;
        y.copy_from_slice(&x);

        let t_k = lengths.sample(&mut length_rng);
        for _ in 0..t_k {
            let batch = sampler.sample(&mut batch_rng, cfg.batch)?;
            direction_into(problem, &g, &x, &y, batch, &mut v);
            for (yj, vj) in y.iter_mut().zip(&v) {
                *yj -= h * vj;
            }
            reg.prox_in_place(h, &mut y);
        }
        let work = 2 * (cfg.batch * t_k) as u64;
        evaluations += work;
        inner_evaluations += work;

        std::mem::swap(&mut x, &mut y);
        recorder.push(problem, &x, evaluations, inner_evaluations, t_k as u64)?;
    }

    Ok(RunTrace {
        n,
        batch: cfg.batch,
        records: recorder.records,
        x_final: x,
    })
}

/// Mini-batch proximal SGD with a constant stepsize. Records the start and
/// then every time another `n` gradient evaluations have been spent, plus
/// the final iterate.
pub fn run_prox_sgd(
    problem: &CompositeProblem,
    cfg: &SgdConfig,
    reference: Option<f64>,
) -> Result<RunTrace, SolverError> {
    let n = problem.n();
    let d = problem.dim();
    if !(cfg.stepsize >= 0.0 && cfg.stepsize.is_finite()) {
        return Err(SolverError::InvalidParameter(format!(
            "SGD stepsize must be nonnegative, got {}",
            cfg.stepsize
        )));
    }
    if cfg.batch == 0 || cfg.batch > n {
        return Err(SamplingError::BatchOutOfRange { n, b: cfg.batch }.into());
    }
    let h = cfg.stepsize;
    let reg = problem.regularizer();
    let components = problem.components();
    let mut rng = RngState::with_stream(cfg.seed, BATCH_STREAM);
    let mut sampler = MinibatchSampler::new(n);

    let mut x = start_point(problem, &cfg.x0)?;
    let mut grad = vec![0.0; d];
    let scale = 1.0 / cfg.batch as f64;
    let mut evaluations = 0u64;
    let mut next_mark = n as u64;
    let mut steps_since = 0u64;

    let mut recorder = Recorder::new(reference);
    recorder.push(problem, &x, 0, 0, 0)?;

    for step in 0..cfg.steps {
        if h > 0.0 {
            grad.fill(0.0);
            for &i in sampler.sample(&mut rng, cfg.batch)? {
                components.add_gradient(i, &x, scale, &mut grad);
            }
            for (xj, gj) in x.iter_mut().zip(&grad) {
                *xj -= h * gj;
            }
            reg.prox_in_place(h, &mut x);
        } else {
            sampler.sample(&mut rng, cfg.batch)?;
        }
        evaluations += cfg.batch as u64;
        steps_since += 1;
        if evaluations >= next_mark || step + 1 == cfg.steps {
            recorder.push(problem, &x, evaluations, evaluations, steps_since)?;
            steps_since = 0;
            while next_mark <= evaluations {
                next_mark += n as u64;
            }
        }
    }

    Ok(RunTrace {
        n,
        batch: cfg.batch,
        records: recorder.records,
        x_final: x,
    })
}

/// Result of the deterministic proximal-gradient reference solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// False when `max_iters` ran out before the tolerance was met.
    pub converged: bool,
}

/// Proximal gradient descent with stepsize `1/L` until successive objective
/// values differ by at most `tol`. Returns the best iterate seen.
pub fn prox_gd_reference(problem: &CompositeProblem, tol: f64, max_iters: usize) -> Result<Reference, SolverError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SolverError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let h = 1.0 / problem.constants().lipschitz;
    let reg = problem.regularizer();
    let d = problem.dim();
    let mut y = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut value = problem.objective(&y)?;
    let mut best = (value, y.clone());

    for iter in 1..=max_iters {
        problem.full_gradient_into(&y, &mut g)?;
        for (yj, gj) in y.iter_mut().zip(&g) {
            *yj -= h * gj;
        }
        reg.prox_in_place(h, &mut y);
        let next = problem.objective(&y)?;
        if !next.is_finite() {
            return Err(SolverError::Diverged { epoch: iter });
        }
        if next < best.0 {
            best = (next, y.clone());
        }
        let change = (value - next).abs();
        value = next;
        if change <= tol {
            return Ok(Reference {
                x: best.1,
                objective: best.0,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(Reference {
        x: best.1,
        objective: best.0,
        iterations: max_iters,
        converged: false,
    })
}
