//! Composite objectives `P(x) = (1/n) Σ f_i(x) + R(x)`.
//!
//! The smooth part is supplied through the [`Components`] trait; two linear
//! models (logistic and least squares) are provided. The regularizer is one
//! of a few closed-form-prox penalties. Constants `L`, `mu`, `nu_f`, `nu_r`
//! travel with the problem so that solvers and the rate calculator agree.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::LabeledDataset;

/// Dense Gram matrices are only formed up to this dimension when estimating
/// the strong convexity of a least-squares problem.
const MAX_GRAM_DIM: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("point has dimension {got}, problem has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("problem needs at least one component")]
    NoComponents,
    #[error("problem dimension must be positive")]
    ZeroDimension,
    #[error("invalid constant: {0}")]
    InvalidConstant(String),
    #[error("stepsize must be positive and finite, got {0}")]
    InvalidStepsize(f64),
    #[error("regularization weight must be nonnegative and finite, got {0}")]
    InvalidWeight(f64),
    #[error("label {label} at row {row} is not -1 or +1")]
    NonBinaryLabel { row: usize, label: f64 },
}

/// The smooth components `f_1..f_n`.
pub trait Components: Send + Sync {
    /// Number of components `n`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dimension `d` of the decision variable.
    fn dim(&self) -> usize;

    /// `f_i(x)`.
    fn value(&self, i: usize, x: &[f64]) -> f64;

    /// `out += scale * ∇f_i(x)`.
    fn add_gradient(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `ln(1 + exp(-b ⟨a, x⟩))`
    Logistic,
    /// `½ (⟨a, x⟩ - b)²`
    Squared,
}

impl Loss {
    /// Loss value and derivative with respect to the margin `z = ⟨a, x⟩`.
    fn eval(self, z: f64, label: f64) -> (f64, f64) {
        match self {
            Loss::Logistic => {
                let t = -label * z;
                (softplus(t), -label * sigmoid(t))
            }
            Loss::Squared => {
                let r = z - label;
                (0.5 * r * r, r)
            }
        }
    }

    /// Bound on the second derivative in `z`.
    fn curvature(self) -> f64 {
        match self {
            Loss::Logistic => 0.25,
            Loss::Squared => 1.0,
        }
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Linear model components `f_i(x) = loss(⟨a_i, x⟩, b_i) + (l2/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    data: LabeledDataset,
    loss: Loss,
    l2: f64,
}

impl LinearModel {
    pub fn new(data: LabeledDataset, loss: Loss, l2: f64) -> Self {
        LinearModel { data, loss, l2 }
    }

    pub fn data(&self) -> &LabeledDataset {
        &self.data
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    /// Uniform Lipschitz constant of the component gradients.
    pub fn lipschitz(&self) -> f64 {
        self.loss.curvature() * self.data.max_row_norm_sq() + self.l2
    }
}

impl Components for LinearModel {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn value(&self, i: usize, x: &[f64]) -> f64 {
        let z = self.data.row(i).dot(x);
        let (v, _) = self.loss.eval(z, self.data.label(i));
        if self.l2 > 0.0 {
            v + 0.5 * self.l2 * x.iter().map(|xj| xj * xj).sum::<f64>()
        } else {
            v
        }
    }

    fn add_gradient(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let row = self.data.row(i);
        let (_, dz) = self.loss.eval(row.dot(x), self.data.label(i));
        row.axpy(scale * dz, out);
        if self.l2 > 0.0 {
            let s = scale * self.l2;
            for (o, xj) in out.iter_mut().zip(x) {
                *o += s * xj;
            }
        }
    }
}

/// Simple convex penalties with closed-form proximal maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    Zero,
    /// `(lambda/2) ‖x‖²`
    L2 {
        lambda: f64,
    },
    /// `lambda ‖x‖₁`
    L1 {
        lambda: f64,
    },
    /// `l1 ‖x‖₁ + (l2/2) ‖x‖²`
    ElasticNet {
        l1: f64,
        l2: f64,
    },
}

impl Regularizer {
    pub fn validate(&self) -> Result<(), ProblemError> {
        let weights: &[f64] = match self {
            Regularizer::Zero => &[],
            Regularizer::L2 { lambda } | Regularizer::L1 { lambda } => std::slice::from_ref(lambda),
            Regularizer::ElasticNet { l1, l2 } => &[*l1, *l2],
        };
        match weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            Some(&w) => Err(ProblemError::InvalidWeight(w)),
            None => Ok(()),
        }
    }

    /// Strong convexity modulus of `R` itself.
    pub fn strong_convexity(&self) -> f64 {
        match *self {
            Regularizer::Zero | Regularizer::L1 { .. } => 0.0,
            Regularizer::L2 { lambda } => lambda,
            Regularizer::ElasticNet { l2, .. } => l2,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let sq = || x.iter().map(|v| v * v).sum::<f64>();
        let abs = || x.iter().map(|v| v.abs()).sum::<f64>();
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L2 { lambda } => 0.5 * lambda * sq(),
            Regularizer::L1 { lambda } => lambda * abs(),
            Regularizer::ElasticNet { l1, l2 } => l1 * abs() + 0.5 * l2 * sq(),
        }
    }

    /// `prox_{hR}(z)`, the minimizer of `½‖x - z‖² + h R(x)`.
    pub fn prox(&self, h: f64, z: &[f64]) -> Result<Vec<f64>, ProblemError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(ProblemError::InvalidStepsize(h));
        }
        let mut x = z.to_vec();
        self.prox_in_place(h, &mut x);
        Ok(x)
    }

    /// In-place prox; `h` is assumed positive.
    pub fn prox_in_place(&self, h: f64, z: &mut [f64]) {
        match *self {
            Regularizer::Zero => {}
            Regularizer::L2 { lambda } => {
                let s = 1.0 / (1.0 + h * lambda);
                z.iter_mut().for_each(|v| *v *= s);
            }
            Regularizer::L1 { lambda } => {
                let t = h * lambda;
                z.iter_mut().for_each(|v| *v = soft_threshold(*v, t));
            }
            Regularizer::ElasticNet { l1, l2 } => {
                let t = h * l1;
                let s = 1.0 / (1.0 + h * l2);
                z.iter_mut().for_each(|v| *v = s * soft_threshold(*v, t));
            }
        }
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::Zero => write!(f, "none"),
            Regularizer::L2 { lambda } => write!(f, "l2({lambda})"),
            Regularizer::L1 { lambda } => write!(f, "l1({lambda})"),
            Regularizer::ElasticNet { l1, l2 } => write!(f, "en({l1}, {l2})"),
        }
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `L`, `mu`, and the known strong-convexity lower bounds of `f` and `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Uniform Lipschitz constant of every `∇f_i`.
    pub lipschitz: f64,
    /// Strong convexity of `P`.
    pub mu: f64,
    pub nu_f: f64,
    pub nu_r: f64,
}

/// Where the `(λ/2)‖x‖²` term of a regularized linear model lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L2Placement {
    InF,
    #[default]
    InR,
}

/// The composite objective with its oracles and constants.
#[derive(Clone)]
pub struct CompositeProblem {
    components: Arc<dyn Components>,
    regularizer: Regularizer,
    constants: Constants,
}

impl fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("n", &self.n())
            .field("d", &self.dim())
            .field("regularizer", &self.regularizer)
            .field("constants", &self.constants)
            .finish()
    }
}

impl CompositeProblem {
    pub fn new(
        components: Arc<dyn Components>,
        regularizer: Regularizer,
        constants: Constants,
    ) -> Result<Self, ProblemError> {
        if components.is_empty() {
            return Err(ProblemError::NoComponents);
        }
        if components.dim() == 0 {
            return Err(ProblemError::ZeroDimension);
        }
        regularizer.validate()?;
        validate_constants(&constants)?;
        Ok(CompositeProblem {
            components,
            regularizer,
            constants,
        })
    }

    /// A linear model with `l2_in_f` added to every component and an
    /// arbitrary regularizer.
    ///
    /// `mu = l2_in_f + nu_r`, plus the smallest eigenvalue of `AᵀA / n` for
    /// least squares when `d ≤ 512`. Logistic labels must be `±1`.
    pub fn linear(
        data: LabeledDataset,
        loss: Loss,
        l2_in_f: f64,
        regularizer: Regularizer,
    ) -> Result<Self, ProblemError> {
        if loss == Loss::Logistic {
            if let Some(row) = data.labels().iter().position(|&y| y != 1.0 && y != -1.0) {
                return Err(ProblemError::NonBinaryLabel {
                    row,
                    label: data.label(row),
                });
            }
        }
        if !(l2_in_f >= 0.0 && l2_in_f.is_finite()) {
            return Err(ProblemError::InvalidWeight(l2_in_f));
        }
        regularizer.validate()?;
        let data_curvature = if loss == Loss::Squared && data.dim() <= MAX_GRAM_DIM && !data.is_empty() {
            gram_min_eigenvalue(&data)
        } else {
            0.0
        };
        let model = LinearModel::new(data, loss, l2_in_f);
        let nu_r = regularizer.strong_convexity();
        let constants = Constants {
            lipschitz: model.lipschitz(),
            mu: data_curvature + l2_in_f + nu_r,
            nu_f: l2_in_f,
            nu_r,
        };
        CompositeProblem::new(Arc::new(model), regularizer, constants)
    }

    /// Binary logistic regression with an `l2`-weight `lambda`, placed in the
    /// smooth part or in the regularizer.
    pub fn logistic(data: LabeledDataset, lambda: f64, placement: L2Placement) -> Result<Self, ProblemError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(ProblemError::InvalidWeight(lambda));
        }
        match placement {
            L2Placement::InF => CompositeProblem::linear(data, Loss::Logistic, lambda, Regularizer::Zero),
            L2Placement::InR => CompositeProblem::linear(data, Loss::Logistic, 0.0, Regularizer::L2 { lambda }),
        }
    }

    /// Least squares with `R = (lambda/2)‖x‖²`.
    ///
    /// `mu` is `lambda` plus the smallest eigenvalue of `AᵀA / n` when
    /// `d ≤ 512`, otherwise just `lambda`.
    pub fn ridge(data: LabeledDataset, lambda: f64) -> Result<Self, ProblemError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(ProblemError::InvalidWeight(lambda));
        }
        CompositeProblem::linear(data, Loss::Squared, 0.0, Regularizer::L2 { lambda })
    }

    /// Replaces `R`, keeping the data-driven part of `mu`.
    pub fn with_regularizer(self, regularizer: Regularizer) -> Result<Self, ProblemError> {
        let base = self.constants.mu - self.regularizer.strong_convexity();
        let nu_r = regularizer.strong_convexity();
        let constants = Constants {
            mu: base + nu_r,
            nu_r,
            ..self.constants
        };
        CompositeProblem::new(self.components, regularizer, constants)
    }

    /// Overrides the strong convexity constant, e.g. with a sharper bound.
    pub fn with_mu(self, mu: f64) -> Result<Self, ProblemError> {
        let constants = Constants { mu, ..self.constants };
        CompositeProblem::new(self.components, self.regularizer, constants)
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components.dim()
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    pub fn components(&self) -> &dyn Components {
        self.components.as_ref()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ProblemError> {
        if x.len() != self.dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        self.components.value(i, x)
    }

    pub fn component_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.components.add_gradient(i, x, 1.0, &mut g);
        g
    }

    /// `f(x) = (1/n) Σ f_i(x)`.
    pub fn smooth_value(&self, x: &[f64]) -> Result<f64, ProblemError> {
        self.check_dim(x)?;
        let n = self.n();
        Ok((0..n).map(|i| self.components.value(i, x)).sum::<f64>() / n as f64)
    }

    /// `P(x) = f(x) + R(x)`.
    pub fn objective(&self, x: &[f64]) -> Result<f64, ProblemError> {
        Ok(self.smooth_value(x)? + self.regularizer.value(x))
    }

    /// `∇f(x) = (1/n) Σ ∇f_i(x)`, accumulated sequentially.
    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        let mut g = vec![0.0; self.dim()];
        self.full_gradient_into(x, &mut g)?;
        Ok(g)
    }

    pub fn full_gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), ProblemError> {
        self.check_dim(x)?;
        self.check_dim(out)?;
        out.fill(0.0);
        let scale = 1.0 / self.n() as f64;
        for i in 0..self.n() {
            self.components.add_gradient(i, x, scale, out);
        }
        Ok(())
    }
}

fn validate_constants(c: &Constants) -> Result<(), ProblemError> {
    let bad = |msg: String| Err(ProblemError::InvalidConstant(msg));
    if !(c.lipschitz > 0.0 && c.lipschitz.is_finite()) {
        return bad(format!("L = {} must be positive", c.lipschitz));
    }
    if !(c.mu > 0.0 && c.mu.is_finite()) {
        return bad(format!("mu = {} must be positive", c.mu));
    }
    if !(c.nu_f >= 0.0 && c.nu_r >= 0.0) {
        return bad(format!("nu_f = {}, nu_r = {} must be nonnegative", c.nu_f, c.nu_r));
    }
    // Relative slack for the rounding in `mu = base + nu_r`.
    if c.nu_f + c.nu_r > c.mu * (1.0 + 1e-12) {
        return bad(format!("nu_f + nu_r = {} exceeds mu = {}", c.nu_f + c.nu_r, c.mu));
    }
    Ok(())
}

fn gram_min_eigenvalue(data: &LabeledDataset) -> f64 {
    let d = data.dim();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    for row in data.rows() {
        for (j, vj) in row.iter() {
            for (k, vk) in row.iter() {
                gram[(j, k)] += vj * vk;
            }
        }
    }
    gram /= data.len() as f64;
    let min = gram.symmetric_eigenvalues().min();
    // Clamp rounding noise on singular Gram matrices.
    if min > 1e-12 {
        min
    } else {
        0.0
    }
}
