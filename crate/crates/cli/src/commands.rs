use std::fs;
use std::path::Path;

use ms2gd::format::g17;
use ms2gd::problem::CompositeProblem;
use ms2gd::solver::{prox_gd_reference, run_ms2gd, run_prox_sgd, SolverError};
use ms2gd::theory::{plan, rho_general, rho_simplified, speedup_curve, Plan, TheoryError};
use ms2gd::{RunTrace, SgdConfig, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::args::{Command, Format, PlanArgs, ReferenceArgs, SpeedupArgs, TrainArgs};
use crate::output::{to_json, trace_csv, trace_json, write_atomic, PassAxis};
use crate::problem_spec::{build_problem, ProblemSummary};
use crate::solver_spec::{parse_solver, Hyper, SolverSpec};
use crate::{Cli, CliError, Result};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => train(&args),
        Command::Plan(args) => plan_cmd(&args),
        Command::Speedup(args) => speedup(&args),
        Command::Reference(args) => reference(&args),
    }
}

fn theory_error(e: TheoryError) -> CliError {
    CliError::Usage(e.to_string())
}

fn solver_error(label: &str, seed: u64, e: SolverError) -> CliError {
    match e {
        SolverError::Diverged { .. } => CliError::Runtime(format!("{label} seed {seed}: {e}")),
        other => CliError::Usage(format!("{label} seed {seed}: {other}")),
    }
}

/// A fully resolved solver ready to run for any seed.
#[derive(Debug, Clone)]
enum Resolved {
    Ms2gd {
        batch: usize,
        stepsize: f64,
        inner_max: usize,
        plan: Option<Plan>,
        m_capped: bool,
    },
    Sgd {
        batch: usize,
        stepsize: f64,
        steps: usize,
    },
}

#[derive(Debug, Serialize)]
struct RunEntry {
    solver: String,
    kind: &'static str,
    batch: usize,
    seed: u64,
    stepsize: f64,
    inner_max: Option<usize>,
    epochs: Option<usize>,
    steps: Option<usize>,
    plan: Option<Plan>,
    m_capped: bool,
    /// Per-epoch contraction guaranteed by the theory, if the conditions hold.
    rate_bound: Option<f64>,
    /// `ok` or the name of the violated condition.
    feasibility: String,
    trace: String,
    ideal_trace: String,
    final_objective: f64,
    final_gap: Option<f64>,
    evaluations: u64,
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: &'static str,
    problem: ProblemSummary,
    reference_objective: Option<f64>,
    timing: bool,
    runs: Vec<RunEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReferenceFile {
    status: String,
    objective: f64,
    iterations: usize,
    tol: f64,
    max_iters: usize,
    n: usize,
    d: usize,
    x_file: String,
}

fn resolve(text: &str, spec: &SolverSpec, args: &TrainArgs, problem: &CompositeProblem) -> Result<Resolved> {
    let n = problem.n();
    let c = problem.constants();
    if spec.batch() > n {
        return Err(CliError::Usage(format!("{text}: b = {} exceeds n = {n}", spec.batch())));
    }
    match spec {
        SolverSpec::Ms2gd {
            batch,
            hyper: Hyper::Explicit { stepsize, inner_max },
        } => {
            let cfg = SolverConfig {
                inner_max: *inner_max,
                stepsize: *stepsize,
                batch: *batch,
                epochs: args.epochs,
                seed: 0,
                x0: None,
            };
            if let Err(reason) = cfg.feasibility(problem) {
                if args.allow_infeasible {
                    eprintln!("warning: {text}: {}: {reason}", reason.name());
                } else {
                    return Err(CliError::Infeasible {
                        solver: text.to_string(),
                        reason,
                    });
                }
            }
            if !(*stepsize > 0.0) {
                return Err(CliError::Usage(format!("{text}: h must be positive")));
            }
            Ok(Resolved::Ms2gd {
                batch: *batch,
                stepsize: *stepsize,
                inner_max: *inner_max,
                plan: None,
                m_capped: false,
            })
        }
        SolverSpec::Ms2gd {
            batch,
            hyper: Hyper::Auto,
        } => {
            let rho = args
                .rho_target
                .ok_or_else(|| CliError::Usage(format!("{text}: auto needs --rho-target")))?;
            let p = plan(rho, *batch, n, c.lipschitz, c.mu).map_err(theory_error)?;
            let cap = args.m_cap.unwrap_or(10 * n as u64).max(1);
            let m_capped = p.m_star_int > cap;
            let inner_max = p.m_star_int.min(cap) as usize;
            eprintln!(
                "{text}: planned h = {}, m* = {} ({})",
                g17(p.h_star),
                p.m_star_int,
                p.regime.as_str()
            );
            if m_capped {
                let at_cap = rho_simplified(p.h_star, inner_max as f64, c.lipschitz, c.mu, p.alpha);
                let consequence = match at_cap {
                    Ok(r) if r < 1.0 => format!(
                        "predicted rho at m = {inner_max} is {} (target {} not met)",
                        g17(r),
                        g17(rho)
                    ),
                    Ok(r) => format!(
                        "predicted rho at m = {inner_max} is {}, no contraction guaranteed",
                        g17(r)
                    ),
                    Err(e) => format!("no rate at m = {inner_max}: {e}"),
                };
                eprintln!("{text}: m* capped at {cap}; {consequence}");
            }
            Ok(Resolved::Ms2gd {
                batch: *batch,
                stepsize: p.h_star,
                inner_max,
                plan: Some(p),
                m_capped,
            })
        }
        SolverSpec::Sgd {
            batch,
            stepsize,
            passes,
        } => {
            let passes = passes.unwrap_or(args.epochs as f64);
            let steps = (passes * n as f64 / *batch as f64).ceil() as usize;
            Ok(Resolved::Sgd {
                batch: *batch,
                stepsize: *stepsize,
                steps,
            })
        }
    }
}

fn read_reference(path: &Path, problem: &CompositeProblem) -> Result<f64> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let r: ReferenceFile =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if (r.n, r.d) != (problem.n(), problem.dim()) {
        return Err(CliError::Usage(format!(
            "{}: reference is for n = {}, d = {} but the problem has n = {}, d = {}",
            path.display(),
            r.n,
            r.d,
            problem.n(),
            problem.dim()
        )));
    }
    if r.status != "converged" {
        eprintln!("warning: {}: reference status is {}", path.display(), r.status);
    }
    Ok(r.objective)
}

fn train(args: &TrainArgs) -> Result<()> {
    let specs = args
        .solvers
        .iter()
        .map(|s| parse_solver(s).map(|spec| (s.clone(), spec)))
        .collect::<Result<Vec<_>>>()?;
    if args.epochs == 0 {
        return Err(CliError::Usage("--epochs must be at least 1".into()));
    }
    if let Some(tol) = args.reference_tol {
        if !(tol > 0.0) {
            return Err(CliError::Usage(format!("--reference-tol must be positive, got {tol}")));
        }
    }
    let (problem, summary) = build_problem(&args.problem)?;
    let resolved = specs
        .iter()
        .map(|(text, spec)| resolve(text, spec, args, &problem))
        .collect::<Result<Vec<_>>>()?;

    let reference = match (&args.reference, args.reference_tol) {
        (Some(path), _) => Some(read_reference(path, &problem)?),
        (None, Some(tol)) => {
            let r = prox_gd_reference(&problem, tol, 1_000_000).map_err(|e| CliError::Runtime(e.to_string()))?;
            if !r.converged {
                eprintln!(
                    "warning: reference did not reach tol {} in {} iterations",
                    g17(tol),
                    r.iterations
                );
            }
            Some(r.objective)
        }
        (None, None) => None,
    };

    fs::create_dir_all(&args.out_dir)?;
    let ext = match args.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let render = |trace: &RunTrace, axis| match args.format {
        Format::Csv => trace_csv(trace, axis, args.timing),
        Format::Json => trace_json(trace, axis, args.timing),
    };

    let mut runs = Vec::new();
    for (i, ((text, spec), solver)) in specs.iter().zip(&resolved).enumerate() {
        for &seed in &args.seeds {
            let (trace, entry_base) = match solver {
                Resolved::Ms2gd {
                    batch,
                    stepsize,
                    inner_max,
                    plan,
                    m_capped,
                } => {
                    let cfg = SolverConfig {
                        inner_max: *inner_max,
                        stepsize: *stepsize,
                        batch: *batch,
                        epochs: args.epochs,
                        seed,
                        x0: None,
                    };
                    let inputs = cfg.rate_inputs(&problem);
                    let (rate_bound, feasibility) = match rho_general(&inputs) {
                        Ok(r) => (Some(r), "ok".to_string()),
                        Err(TheoryError::Infeasible(reason)) => (None, reason.name().to_string()),
                        Err(e) => (None, e.to_string()),
                    };
                    let trace = run_ms2gd(&problem, &cfg, reference).map_err(|e| solver_error(text, seed, e))?;
                    (
                        trace,
                        (
                            *stepsize,
                            Some(*inner_max),
                            Some(args.epochs),
                            None,
                            *plan,
                            *m_capped,
                            rate_bound,
                            feasibility,
                        ),
                    )
                }
                Resolved::Sgd { batch, stepsize, steps } => {
                    let cfg = SgdConfig {
                        stepsize: *stepsize,
                        batch: *batch,
                        steps: *steps,
                        seed,
                        x0: None,
                    };
                    let trace = run_prox_sgd(&problem, &cfg, reference).map_err(|e| solver_error(text, seed, e))?;
                    (
                        trace,
                        (
                            *stepsize,
                            None,
                            None,
                            Some(*steps),
                            None,
                            false,
                            None,
                            "n/a".to_string(),
                        ),
                    )
                }
            };
            let (stepsize, inner_max, epochs, steps, plan, m_capped, rate_bound, feasibility) = entry_base;

            let stem = format!("{i:02}_{}_b{}_seed{seed}", spec.kind(), spec.batch());
            let trace_name = format!("{stem}.{ext}");
            let ideal_name = format!("{stem}_ideal.{ext}");
            write_atomic(
                &args.out_dir.join(&trace_name),
                render(&trace, PassAxis::Sequential).as_bytes(),
            )?;
            write_atomic(
                &args.out_dir.join(&ideal_name),
                render(&trace, PassAxis::IdealParallel).as_bytes(),
            )?;

            let last = trace.records.last().expect("traces start with a record");
            println!(
                "{trace_name}: objective {} after {} passes",
                g17(last.objective),
                g17(last.evaluations as f64 / problem.n() as f64)
            );
            runs.push(RunEntry {
                solver: text.clone(),
                kind: spec.kind(),
                batch: spec.batch(),
                seed,
                stepsize,
                inner_max,
                epochs,
                steps,
                plan,
                m_capped,
                rate_bound,
                feasibility,
                trace: trace_name,
                ideal_trace: ideal_name,
                final_objective: last.objective,
                final_gap: last.gap,
                evaluations: last.evaluations,
            });
        }
    }

    let manifest = Manifest {
        command: "train",
        problem: summary,
        reference_objective: reference,
        timing: args.timing,
        runs,
    };
    write_atomic(&args.out_dir.join("manifest.json"), to_json(&manifest).as_bytes())?;
    Ok(())
}

fn plan_cmd(args: &PlanArgs) -> Result<()> {
    let p = plan(args.rho_target, args.batch, args.n, args.lipschitz, args.mu).map_err(theory_error)?;
    match args.format {
        Format::Json => print!("{}", to_json(&p)),
        Format::Csv => {
            println!("rho_target,batch,alpha,h_tilde,h_star,m_star_real,m_star_int,regime,predicted_rho");
            println!(
                "{},{},{},{},{},{},{},{},{}",
                g17(p.rho_target),
                p.batch,
                g17(p.alpha),
                p.h_tilde.map(g17).unwrap_or_default(),
                g17(p.h_star),
                g17(p.m_star_real),
                p.m_star_int,
                p.regime.as_str(),
                g17(p.predicted_rho)
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SpeedupRow {
    b: usize,
    h_star: Option<f64>,
    m_star: Option<f64>,
    work_ratio: Option<f64>,
    regime: String,
    error: Option<String>,
}

fn speedup(args: &SpeedupArgs) -> Result<()> {
    // Validate the shared inputs once so a bad target is a usage error, not
    // a column of error rows.
    if let Err(e @ (TheoryError::InvalidTarget(_) | TheoryError::Infeasible(_))) =
        plan(args.rho_target, 1, args.n.max(1), args.lipschitz, args.mu)
    {
        return Err(theory_error(e));
    }
    if args.n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let b_max = args.b_max.unwrap_or(args.n);
    if b_max == 0 {
        return Err(CliError::Usage("--b-max must be positive".into()));
    }
    let grid: Vec<usize> = (1..=b_max).collect();
    let curve = speedup_curve(args.rho_target, args.n, args.lipschitz, args.mu, &grid);
    let rows: Vec<SpeedupRow> = curve
        .points
        .iter()
        .map(|pt| match &pt.plan {
            Ok(p) => SpeedupRow {
                b: pt.batch,
                h_star: Some(p.h_star),
                m_star: Some(p.m_star_real),
                work_ratio: pt.work_ratio,
                regime: p.regime.as_str().to_string(),
                error: None,
            },
            Err(e) => SpeedupRow {
                b: pt.batch,
                h_star: None,
                m_star: None,
                work_ratio: None,
                regime: "error".to_string(),
                error: Some(e.to_string()),
            },
        })
        .collect();

    let text = match args.format {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let mut out = String::from("b,h_star,m_star,work_ratio,regime\n");
            let cell = |v: Option<f64>| v.map(g17).unwrap_or_default();
            for r in &rows {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.b,
                    cell(r.h_star),
                    cell(r.m_star),
                    cell(r.work_ratio),
                    r.regime
                ));
            }
            out
        }
    };
    match &args.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn reference(args: &ReferenceArgs) -> Result<()> {
    if !(args.tol > 0.0 && args.tol.is_finite()) {
        return Err(CliError::Usage(format!("--tol must be positive, got {}", args.tol)));
    }
    let (problem, _) = build_problem(&args.problem)?;
    let r = prox_gd_reference(&problem, args.tol, args.max_iters).map_err(|e| CliError::Runtime(e.to_string()))?;
    let status = if r.converged { "converged" } else { "max_iters_reached" };
    if !r.converged {
        eprintln!(
            "warning: tolerance {} not reached in {} iterations",
            g17(args.tol),
            r.iterations
        );
    }

    fs::create_dir_all(&args.out_dir)?;
    let x_text: String = r.x.iter().map(|v| format!("{}\n", g17(*v))).collect();
    write_atomic(&args.out_dir.join("xstar.txt"), x_text.as_bytes())?;
    let file = ReferenceFile {
        status: status.to_string(),
        objective: r.objective,
        iterations: r.iterations,
        tol: args.tol,
        max_iters: args.max_iters,
        n: problem.n(),
        d: problem.dim(),
        x_file: "xstar.txt".to_string(),
    };
    let json = to_json(&file);
    write_atomic(&args.out_dir.join("reference.json"), json.as_bytes())?;
    print!("{json}");
    Ok(())
}
