//! Convergence-rate calculator and the optimal `(h, m)` planner.
//!
//! [`rho_general`] evaluates the per-epoch contraction factor for arbitrary
//! lower bounds `nu_f`, `nu_r`; [`rho_simplified`] is its `nu_f = nu_r = 0`
//! specialization. [`plan`] picks the stepsize and inner-loop length that
//! reach a target factor with the fewest inner steps for a given batch size,
//! and [`speedup_curve`] sweeps that over batch sizes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampling::alpha;

/// A violated condition of the linear-convergence guarantee.
#[derive(Debug, Error, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Infeasibility {
    #[error("stepsize h = {h} must be positive and finite")]
    NonPositiveStepsize { h: f64 },
    #[error("inner loop length m must be at least 1")]
    EmptyInnerLoop,
    #[error("batch size {b} outside [1, {n}]")]
    BatchOutOfRange { n: usize, b: usize },
    #[error("constants must satisfy L > 0, mu > 0 (L = {lipschitz}, mu = {mu})")]
    InvalidConstants { lipschitz: f64, mu: f64 },
    #[error("lower bounds must be nonnegative (nu_f = {nu_f}, nu_r = {nu_r})")]
    NegativeLowerBound { nu_f: f64, nu_r: f64 },
    #[error("h * nu_f = {product} must be below 1")]
    RatioNonPositive { product: f64 },
    #[error("stepsize h = {h} must be below {bound} = min((1 - h nu_f) / ((1 + h nu_r) 4 L alpha), 1 / L)")]
    StepsizeTooLarge { h: f64, bound: f64 },
    #[error("rate denominator {value} is not positive")]
    NonPositiveDenominator { value: f64 },
}

impl Infeasibility {
    /// Stable identifier of the violated condition.
    pub fn name(&self) -> &'static str {
        match self {
            Infeasibility::NonPositiveStepsize { .. } => "non_positive_stepsize",
            Infeasibility::EmptyInnerLoop => "empty_inner_loop",
            Infeasibility::BatchOutOfRange { .. } => "batch_out_of_range",
            Infeasibility::InvalidConstants { .. } => "invalid_constants",
            Infeasibility::NegativeLowerBound { .. } => "negative_lower_bound",
            Infeasibility::RatioNonPositive { .. } => "ratio_non_positive",
            Infeasibility::StepsizeTooLarge { .. } => "stepsize_condition",
            Infeasibility::NonPositiveDenominator { .. } => "non_positive_denominator",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("infeasible parameters: {0}")]
    Infeasible(#[from] Infeasibility),
    #[error("target rate {0} must lie in (0, 1)")]
    InvalidTarget(f64),
    #[error("rho unreachable at b = {b}: capped-regime denominator rho - 4 alpha (1 + rho) = {denominator} <= 0")]
    Unreachable { b: usize, denominator: f64 },
}

/// Everything the general rate depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    pub stepsize: f64,
    pub inner_max: usize,
    pub batch: usize,
    pub n: usize,
    pub lipschitz: f64,
    pub mu: f64,
    pub nu_f: f64,
    pub nu_r: f64,
}

impl RateInputs {
    pub fn alpha(&self) -> Result<f64, Infeasibility> {
        alpha(self.n, self.batch).map_err(|_| Infeasibility::BatchOutOfRange {
            n: self.n,
            b: self.batch,
        })
    }

    /// `r = (1 - h nu_f) / (1 + h nu_r)`.
    pub fn ratio(&self) -> f64 {
        (1.0 - self.stepsize * self.nu_f) / (1.0 + self.stepsize * self.nu_r)
    }

    /// Largest admissible stepsize bound `min(r / (4 L alpha), 1 / L)` at the
    /// current `h` (the bound itself depends on `h` through `r`).
    pub fn stepsize_bound(&self) -> Result<f64, Infeasibility> {
        let a = self.alpha()?;
        let inv_l = 1.0 / self.lipschitz;
        if a == 0.0 {
            return Ok(inv_l);
        }
        Ok((self.ratio() / (4.0 * self.lipschitz * a)).min(inv_l))
    }

    /// Checks every condition of the guarantee, reporting the first failure.
    pub fn check(&self) -> Result<(), Infeasibility> {
        let h = self.stepsize;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Infeasibility::NonPositiveStepsize { h });
        }
        if self.inner_max == 0 {
            return Err(Infeasibility::EmptyInnerLoop);
        }
        let a = self.alpha()?;
        if !(self.lipschitz > 0.0 && self.mu > 0.0) {
            return Err(Infeasibility::InvalidConstants {
                lipschitz: self.lipschitz,
                mu: self.mu,
            });
        }
        if !(self.nu_f >= 0.0 && self.nu_r >= 0.0) {
            return Err(Infeasibility::NegativeLowerBound {
                nu_f: self.nu_f,
                nu_r: self.nu_r,
            });
        }
        if h * self.nu_f >= 1.0 {
            return Err(Infeasibility::RatioNonPositive { product: h * self.nu_f });
        }
        let bound = self.stepsize_bound()?;
        if h >= bound {
            return Err(Infeasibility::StepsizeTooLarge { h, bound });
        }
        let value = self.denominator_factor(a);
        if value <= 0.0 {
            return Err(Infeasibility::NonPositiveDenominator { value });
        }
        Ok(())
    }

    /// `1/(1 + h nu_r) - 4 h L alpha / (1 - h nu_f)`.
    fn denominator_factor(&self, a: f64) -> f64 {
        let h = self.stepsize;
        1.0 / (1.0 + h * self.nu_r) - 4.0 * h * self.lipschitz * a / (1.0 - h * self.nu_f)
    }

    /// `γ = Σ_{j=0}^{m-1} r^j`, in closed form without cancellation.
    pub fn gamma(&self) -> f64 {
        let h = self.stepsize;
        let m = self.inner_max as f64;
        if self.nu_f == 0.0 && self.nu_r == 0.0 {
            return m;
        }
        let ln_r = (-h * self.nu_f).ln_1p() - (h * self.nu_r).ln_1p();
        let one_minus_r = h * (self.nu_f + self.nu_r) / (1.0 + h * self.nu_r);
        -(m * ln_r).exp_m1() / one_minus_r
    }
}

/// Expected per-epoch contraction of `P(x_k) - P(x*)` for general lower
/// bounds `nu_f`, `nu_r`.
pub fn rho_general(inputs: &RateInputs) -> Result<f64, TheoryError> {
    inputs.check()?;
    let a = inputs.alpha()?;
    let h = inputs.stepsize;
    let l = inputs.lipschitz;
    let m = inputs.inner_max as f64;
    let r = inputs.ratio();
    let gamma = inputs.gamma();
    let hr = 1.0 + h * inputs.nu_r;

    let numerator = r.powf(m) / inputs.mu + 4.0 * h * h * l * a / hr * (gamma + r.powf(m - 1.0));
    let denominator = gamma * h * inputs.denominator_factor(a);
    Ok(numerator / denominator)
}

/// Contraction factor with `nu_f = nu_r = 0`:
/// `1/(m h mu (1 - 4hLα)) + 4hLα (m + 1) / (m (1 - 4hLα))`.
///
/// `m` may be fractional (the planner works with real-valued `m`).
pub fn rho_simplified(h: f64, m: f64, lipschitz: f64, mu: f64, alpha_b: f64) -> Result<f64, TheoryError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Infeasibility::NonPositiveStepsize { h }.into());
    }
    if !(m >= 1.0) {
        return Err(Infeasibility::EmptyInnerLoop.into());
    }
    if !(lipschitz > 0.0 && mu > 0.0) {
        return Err(Infeasibility::InvalidConstants { lipschitz, mu }.into());
    }
    let v = 4.0 * h * lipschitz * alpha_b;
    if v >= 1.0 {
        return Err(Infeasibility::StepsizeTooLarge {
            h,
            bound: 1.0 / (4.0 * lipschitz * alpha_b),
        }
        .into());
    }
    Ok(1.0 / (m * h * mu * (1.0 - v)) + v * (m + 1.0) / (m * (1.0 - v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `h_tilde ≤ 1/L`: the unconstrained optimum is admissible.
    Uncapped,
    /// `h_tilde > 1/L`: stepsize clipped to `1/L`.
    CappedAt1OverL,
    /// `b = n`: no sampling variance, `h_tilde` is undefined.
    DegenerateAlphaZero,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Uncapped => "uncapped",
            Regime::CappedAt1OverL => "capped_at_1_over_l",
            Regime::DegenerateAlphaZero => "degenerate_alpha_zero",
        }
    }
}

/// Work-minimizing stepsize and inner-loop length for one batch size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub rho_target: f64,
    pub batch: usize,
    pub alpha: f64,
    /// Unconstrained optimal stepsize; `None` when `alpha = 0`.
    pub h_tilde: Option<f64>,
    pub h_star: f64,
    pub m_star_real: f64,
    pub m_star_int: u64,
    pub regime: Regime,
    /// Simplified rate at `(h_star, m_star_real)`.
    pub predicted_rho: f64,
}

impl Plan {
    /// Simplified rate at the integer inner-loop length.
    pub fn rho_at_int(&self, lipschitz: f64, mu: f64) -> Result<f64, TheoryError> {
        rho_simplified(self.h_star, self.m_star_int as f64, lipschitz, mu, self.alpha)
    }
}

/// `h_tilde = sqrt(c² + k) - c` with `c = (1+ρ)/(ρμ)`, `k = 1/(4μαL)`,
/// evaluated as `k / (sqrt(c² + k) + c)`.
pub fn h_tilde(rho: f64, mu: f64, alpha_b: f64, lipschitz: f64) -> f64 {
    let c = (1.0 + rho) / (rho * mu);
    let k = 1.0 / (4.0 * mu * alpha_b * lipschitz);
    k / ((c * c + k).sqrt() + c)
}

/// Optimal inner-loop length in the uncapped regime:
/// `8αL (1 + ρ + sqrt(μρ²/(4αL) + (1+ρ)²)) / (μρ²)`.
pub fn m_star_uncapped(rho: f64, mu: f64, alpha_b: f64, lipschitz: f64) -> f64 {
    let s = (mu * rho * rho / (4.0 * alpha_b * lipschitz) + (1.0 + rho).powi(2)).sqrt();
    8.0 * alpha_b * lipschitz * (1.0 + rho + s) / (mu * rho * rho)
}

/// Plans `(h*, m*)` for target contraction `rho_target` at batch size `b`.
pub fn plan(rho_target: f64, b: usize, n: usize, lipschitz: f64, mu: f64) -> Result<Plan, TheoryError> {
    let rho = rho_target;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(TheoryError::InvalidTarget(rho));
    }
    if !(lipschitz > 0.0 && lipschitz.is_finite() && mu > 0.0 && mu.is_finite()) {
        return Err(Infeasibility::InvalidConstants { lipschitz, mu }.into());
    }
    let a = alpha(n, b).map_err(|_| Infeasibility::BatchOutOfRange { n, b })?;
    let inv_l = 1.0 / lipschitz;

    let (h_tilde, h_star, m_star_real, regime) = if a == 0.0 {
        (None, inv_l, lipschitz / mu / rho, Regime::DegenerateAlphaZero)
    } else {
        let ht = h_tilde(rho, mu, a, lipschitz);
        if ht <= inv_l {
            (Some(ht), ht, m_star_uncapped(rho, mu, a, lipschitz), Regime::Uncapped)
        } else {
            let denominator = rho - 4.0 * a * (1.0 + rho);
            if denominator <= 0.0 {
                return Err(TheoryError::Unreachable { b, denominator });
            }
            let m = (lipschitz / mu + 4.0 * a) / denominator;
            (Some(ht), inv_l, m, Regime::CappedAt1OverL)
        }
    };

    let m_for_rate = m_star_real.max(1.0);
    let predicted_rho = rho_simplified(h_star, m_for_rate, lipschitz, mu, a)?;
    Ok(Plan {
        rho_target: rho,
        batch: b,
        alpha: a,
        h_tilde,
        h_star,
        m_star_real,
        m_star_int: m_star_real.ceil().max(1.0) as u64,
        regime,
        predicted_rho,
    })
}

/// One batch size of a speedup sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupPoint {
    pub batch: usize,
    pub plan: Result<Plan, TheoryError>,
    /// `m*¹ / (b m*ᵇ)`; above 1 means less total work than `b = 1`.
    pub work_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupCurve {
    pub rho_target: f64,
    pub n: usize,
    pub lipschitz: f64,
    pub mu: f64,
    pub points: Vec<SpeedupPoint>,
    /// First batch size in the sweep whose plan is not in the uncapped regime.
    pub threshold: Option<usize>,
}

impl SpeedupCurve {
    pub fn regimes(&self) -> impl Iterator<Item = Option<Regime>> + '_ {
        self.points.iter().map(|p| p.plan.as_ref().ok().map(|plan| plan.regime))
    }
}

/// Plans every batch size in `b_grid`. Per-`b` failures are kept in the
/// curve instead of aborting the sweep.
pub fn speedup_curve(rho_target: f64, n: usize, lipschitz: f64, mu: f64, b_grid: &[usize]) -> SpeedupCurve {
    let base = plan(rho_target, 1, n, lipschitz, mu).ok().map(|p| p.m_star_real);
    let points: Vec<SpeedupPoint> = b_grid
        .iter()
        .map(|&b| {
            let plan = plan(rho_target, b, n, lipschitz, mu);
            let work_ratio = match (&plan, base) {
                (Ok(p), Some(m1)) => Some(m1 / (b as f64 * p.m_star_real)),
                _ => None,
            };
            SpeedupPoint {
                batch: b,
                plan,
                work_ratio,
            }
        })
        .collect();
    let threshold = points
        .iter()
        .find(|p| !matches!(&p.plan, Ok(plan) if plan.regime == Regime::Uncapped))
        .map(|p| p.batch);
    SpeedupCurve {
        rho_target,
        n,
        lipschitz,
        mu,
        points,
        threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{InnerLoopDistribution, RngState};

    fn inputs(h: f64, m: usize, b: usize, n: usize) -> RateInputs {
        RateInputs {
            stepsize: h,
            inner_max: m,
            batch: b,
            n,
            lipschitz: 1.0,
            mu: 0.1,
            nu_f: 0.0,
            nu_r: 0.0,
        }
    }

    #[test]
    fn hand_evaluated_rate() {
        // 1/(m h mu (1 - 4hL)) = 1/9.6, 4hL (m+1) / (m (1 - 4hL)) = 0.04 * 10001 / 9600.
        let want = 1.0 / 9.6 + 0.04 * 10001.0 / 9600.0;
        let general = rho_general(&inputs(0.01, 10_000, 1, 50)).unwrap();
        let simple = rho_simplified(0.01, 10_000.0, 1.0, 0.1, 1.0).unwrap();
        assert!((general - want).abs() < 1e-14);
        assert!((simple - want).abs() < 1e-14);
        assert!((want - 0.14584).abs() < 1e-5);
    }

    #[test]
    fn full_batch_rate() {
        let rho = rho_simplified(0.5, 20.0, 1.0, 0.1, 0.0).unwrap();
        assert!((rho - 1.0 / (20.0 * 0.5 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn rate_grows_as_stepsize_vanishes() {
        let small = rho_general(&inputs(1e-8, 100, 1, 10)).unwrap();
        let larger = rho_general(&inputs(1e-6, 100, 1, 10)).unwrap();
        assert!(small > larger);
        // about 1 / (m h mu) = 1e7
        assert!(small > 0.9e7);
    }

    #[test]
    fn simplified_rate_decreases_in_m() {
        for &h in &[0.001, 0.01, 0.05, 0.2] {
            for &a in &[1.0, 0.3, 0.01] {
                let mut prev = f64::INFINITY;
                for m in (1..2000).step_by(37) {
                    let rho = rho_simplified(h, m as f64, 1.0, 0.05, a).unwrap();
                    assert!(rho < prev);
                    prev = rho;
                }
            }
        }
    }

    #[test]
    fn infeasibility_is_named() {
        let mut i = inputs(0.3, 10, 1, 10);
        assert_eq!(i.check().unwrap_err().name(), "stepsize_condition");
        i.stepsize = 0.0;
        assert_eq!(i.check().unwrap_err().name(), "non_positive_stepsize");
        i.stepsize = 0.1;
        i.nu_f = 20.0;
        assert_eq!(i.check().unwrap_err().name(), "ratio_non_positive");
        i.nu_f = 0.0;
        i.batch = 11;
        assert_eq!(i.check().unwrap_err().name(), "batch_out_of_range");
        i.batch = 1;
        i.inner_max = 0;
        assert_eq!(i.check().unwrap_err().name(), "empty_inner_loop");
        assert!(matches!(rho_general(&i), Err(TheoryError::Infeasible(_))));
        assert!(rho_simplified(0.25, 10.0, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn closed_form_gamma_matches_sum() {
        let mut rng = RngState::new(8);
        for _ in 0..200 {
            let h = 0.01 + rng.uniform();
            let m = rng.index_in(1, 3000);
            let nu_f = 0.5 * rng.uniform();
            let nu_r = 2.0 * rng.uniform();
            let i = RateInputs {
                stepsize: h,
                inner_max: m,
                batch: 1,
                n: 10,
                lipschitz: 1.0,
                mu: nu_f + nu_r + 0.1,
                nu_f,
                nu_r,
            };
            let dist = InnerLoopDistribution::new(m, h, nu_f, nu_r).unwrap();
            assert!((i.gamma() - dist.gamma()).abs() <= 1e-12 * dist.gamma());
        }
    }

    #[test]
    fn figure_parameters_b1() {
        let p = plan(0.01, 1, 1000, 1.0, 1e-3).unwrap();
        assert_eq!(p.regime, Regime::Uncapped);
        assert_eq!(p.alpha, 1.0);
        // sqrt(101000² + 250) - 101000
        let want = 250.0 / ((101000f64.powi(2) + 250.0).sqrt() + 101000.0);
        assert!((p.h_tilde.unwrap() - want).abs() < 1e-18);
        assert!((p.h_star - 1.2376e-3).abs() < 1e-7);
        assert!((p.m_star_real / 1.616e8 - 1.0).abs() < 1e-4);
        assert!((p.predicted_rho - 0.01).abs() < 1e-9);
    }

    #[test]
    fn full_batch_plan_is_degenerate() {
        let p = plan(0.1, 1000, 1000, 1.0, 1e-3).unwrap();
        assert_eq!(p.regime, Regime::DegenerateAlphaZero);
        assert_eq!(p.h_tilde, None);
        assert_eq!(p.h_star, 1.0);
        assert!((p.m_star_real - 1e3 / 0.1).abs() < 1e-9);
        assert!((p.predicted_rho - 0.1).abs() < 1e-12);
    }

    #[test]
    fn plan_rejects_bad_target() {
        assert_eq!(plan(1.5, 1, 10, 1.0, 0.1), Err(TheoryError::InvalidTarget(1.5)));
        assert!(plan(0.0, 1, 10, 1.0, 0.1).is_err());
        assert!(plan(0.5, 0, 10, 1.0, 0.1).is_err());
    }

    /// `h_tilde ≤ ρ / (8αL(1+ρ))`, so whenever the stepsize is capped the
    /// capped denominator `ρ - 4α(1+ρ)` is at least `ρ/2 > 0`.
    #[test]
    fn capped_regime_is_always_reachable() {
        let mut rng = RngState::new(31);
        for _ in 0..5000 {
            let rho = 0.001 + 0.998 * rng.uniform();
            let n = rng.index_in(2, 5000);
            let b = rng.index_in(1, n);
            let l = 10f64.powf(4.0 * rng.uniform() - 2.0);
            let mu = l * 10f64.powf(-6.0 * rng.uniform());
            let p = plan(rho, b, n, l, mu).unwrap();
            let a = alpha(n, b).unwrap();
            assert!(p.h_tilde.unwrap() <= rho / (8.0 * a * l * (1.0 + rho)) * (1.0 + 1e-12));
            if p.regime == Regime::CappedAt1OverL {
                assert!(rho - 4.0 * a * (1.0 + rho) >= rho / 2.0);
            }
        }
    }

    #[test]
    fn capped_plan_meets_target() {
        let p = plan(0.1, 600, 1000, 1.0, 1e-3).unwrap();
        assert_eq!(p.regime, Regime::CappedAt1OverL);
        assert_eq!(p.h_star, 1.0);
        assert!(p.predicted_rho <= 0.1 + 1e-9);
        assert!(p.rho_at_int(1.0, 1e-3).unwrap() <= 0.1 * (1.0 + 1e-6));
    }

    #[test]
    fn single_point_curve() {
        let curve = speedup_curve(0.1, 1000, 1.0, 1e-3, &[1]);
        assert_eq!(curve.points.len(), 1);
        assert_eq!(curve.points[0].work_ratio, Some(1.0));
        assert_eq!(curve.threshold, None);
    }

    #[test]
    fn curve_keeps_per_batch_errors() {
        let curve = speedup_curve(0.5, 100, 1.0, 0.01, &[1, 101, 100]);
        assert!(curve.points[0].plan.is_ok());
        assert!(matches!(
            curve.points[1].plan,
            Err(TheoryError::Infeasible(Infeasibility::BatchOutOfRange { .. }))
        ));
        assert_eq!(curve.points[1].work_ratio, None);
        assert!(curve.points[2].plan.is_ok());
        assert_eq!(curve.threshold, Some(101));
    }
}
