//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every exported function returns a JSON string. The pure `*_value`
//! functions carry the logic and are tested natively.

use ms2gd::data::generate_synthetic;
use ms2gd::solver::{prox_gd_reference, run_ms2gd};
use ms2gd::theory::{plan, rho_general, speedup_curve};
use ms2gd::{CompositeProblem, RateInputs, SolverConfig, SyntheticSpec, Task};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest inner loop the demo will run, in passes over the data.
const INNER_PASS_CAP: usize = 5;

pub fn speedup_curve_value(rho: f64, n: usize, lipschitz: f64, mu: f64, b_max: usize) -> Result<Value, String> {
    plan(rho, 1, n, lipschitz, mu).map_err(|e| e.to_string())?;
    let grid: Vec<usize> = (1..=b_max.min(n)).collect();
    let curve = speedup_curve(rho, n, lipschitz, mu, &grid);
    let points: Vec<Value> = curve
        .points
        .iter()
        .filter_map(|p| {
            let plan = p.plan.as_ref().ok()?;
            Some(json!({
                "b": p.batch,
                "h_star": plan.h_star,
                "m_star": plan.m_star_real,
                "work_ratio": p.work_ratio,
                "regime": plan.regime.as_str(),
            }))
        })
        .collect();
    Ok(json!({ "threshold": curve.threshold, "points": points }))
}

pub fn rate_value(h: f64, m: usize, b: usize, n: usize, lipschitz: f64, mu: f64) -> Value {
    let inputs = RateInputs {
        stepsize: h,
        inner_max: m,
        batch: b,
        n,
        lipschitz,
        mu,
        nu_f: 0.0,
        nu_r: 0.0,
    };
    match rho_general(&inputs) {
        Ok(rho) => json!({ "feasible": true, "rho": rho }),
        Err(e) => json!({ "feasible": false, "reason": e.to_string() }),
    }
}

/// Runs planned mS2GD on synthetic ridge regression for each batch size and
/// reports the optimality gap against effective passes.
pub fn convergence_value(
    n: usize,
    d: usize,
    lambda: f64,
    rho: f64,
    batches: &[usize],
    epochs: usize,
    seed: u64,
) -> Result<Value, String> {
    let mut spec = SyntheticSpec::new(n, d, Task::Regression, seed);
    spec.noise = 0.1;
    let problem = CompositeProblem::ridge(generate_synthetic(&spec), lambda).map_err(|e| e.to_string())?;
    let c = problem.constants();
    let reference = prox_gd_reference(&problem, 1e-13, 100_000).map_err(|e| e.to_string())?;

    let mut runs = Vec::new();
    for &b in batches {
        let p = plan(rho, b, n, c.lipschitz, c.mu).map_err(|e| format!("b = {b}: {e}"))?;
        let cfg = SolverConfig {
            inner_max: (p.m_star_int as usize).min(INNER_PASS_CAP * n / b).max(1),
            stepsize: p.h_star,
            batch: b,
            epochs,
            seed,
            x0: None,
        };
        let trace = run_ms2gd(&problem, &cfg, Some(reference.objective)).map_err(|e| e.to_string())?;
        let passes: Vec<f64> = trace.records.iter().map(|r| r.evaluations as f64 / n as f64).collect();
        let gaps: Vec<f64> = trace.records.iter().map(|r| r.gap.unwrap_or(f64::NAN)).collect();
        runs.push(json!({
            "b": b,
            "h": cfg.stepsize,
            "m": cfg.inner_max,
            "passes": passes,
            "gaps": gaps,
        }));
    }
    Ok(json!({ "lipschitz": c.lipschitz, "mu": c.mu, "runs": runs }))
}

fn to_js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn speedup_curve_json(rho: f64, n: usize, lipschitz: f64, mu: f64, b_max: usize) -> Result<String, JsError> {
    to_js(speedup_curve_value(rho, n, lipschitz, mu, b_max))
}

#[wasm_bindgen]
pub fn rate_json(h: f64, m: usize, b: usize, n: usize, lipschitz: f64, mu: f64) -> String {
    rate_value(h, m, b, n, lipschitz, mu).to_string()
}

#[wasm_bindgen]
pub fn convergence_json(
    n: usize,
    d: usize,
    lambda: f64,
    rho: f64,
    batches: Vec<usize>,
    epochs: usize,
    seed: u64,
) -> Result<String, JsError> {
    to_js(convergence_value(n, d, lambda, rho, &batches, epochs, seed))
}
