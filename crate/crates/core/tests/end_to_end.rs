use ms2gd::data::{generate_synthetic, parse_libsvm, write_libsvm, ParseOptions};
use ms2gd::solver::{prox_gd_reference, run_ms2gd};
use ms2gd::theory::{plan, rho_general};
use ms2gd::{CompositeProblem, L2Placement, Loss, Regularizer, SolverConfig, SyntheticSpec, Task};

fn classification(n: usize, d: usize, seed: u64) -> ms2gd::LabeledDataset {
    let mut spec = SyntheticSpec::new(n, d, Task::Classification, seed);
    spec.noise = 0.05;
    generate_synthetic(&spec)
}

#[test]
fn dataset_survives_a_text_round_trip_into_a_solver() {
    let data = classification(300, 12, 3);
    let mut text = Vec::new();
    write_libsvm(&data, &mut text).unwrap();
    let parsed = parse_libsvm(text.as_slice(), ParseOptions::default()).unwrap();
    assert_eq!(parsed, data);

    let a = CompositeProblem::logistic(data, 0.01, L2Placement::InR).unwrap();
    let b = CompositeProblem::logistic(parsed, 0.01, L2Placement::InR).unwrap();
    let cfg = SolverConfig {
        inner_max: 100,
        stepsize: 0.5,
        batch: 4,
        epochs: 3,
        seed: 5,
        x0: None,
    };
    let ta = run_ms2gd(&a, &cfg, None).unwrap();
    let tb = run_ms2gd(&b, &cfg, None).unwrap();
    assert_eq!(ta.x_final, tb.x_final);
}

#[test]
fn planned_run_meets_its_rate_on_average() {
    let problem = CompositeProblem::logistic(classification(400, 10, 9), 0.05, L2Placement::InR).unwrap();
    let c = problem.constants();
    let p = plan(0.5, 4, problem.n(), c.lipschitz, c.mu).unwrap();
    let cfg = SolverConfig {
        inner_max: p.m_star_int as usize,
        stepsize: p.h_star,
        batch: 4,
        epochs: 4,
        seed: 0,
        x0: None,
    };
    let rho = rho_general(&cfg.rate_inputs(&problem)).unwrap();
    assert!(rho <= 0.5 + 1e-9);

    let reference = prox_gd_reference(&problem, 1e-14, 100_000).unwrap();
    let seeds = 30;
    let mut mean_gap = vec![0.0; cfg.epochs + 1];
    for seed in 0..seeds {
        let trace = run_ms2gd(
            &problem,
            &SolverConfig { seed, ..cfg.clone() },
            Some(reference.objective),
        )
        .unwrap();
        for (k, r) in trace.records.iter().enumerate() {
            mean_gap[k] += r.gap.unwrap() / seeds as f64;
        }
    }
    for (k, g) in mean_gap.iter().enumerate() {
        assert!(*g <= rho.powi(k as i32) * mean_gap[0] + 1e-12, "epoch {k}: {g}");
    }
}

#[test]
fn l1_solution_is_sparse_and_matches_the_reference() {
    let reg = Regularizer::ElasticNet { l1: 0.02, l2: 0.01 };
    let problem = CompositeProblem::linear(classification(200, 30, 4), Loss::Logistic, 0.0, reg).unwrap();
    let reference = prox_gd_reference(&problem, 1e-15, 100_000).unwrap();
    let cfg = SolverConfig {
        inner_max: 400,
        stepsize: 0.5,
        batch: 2,
        epochs: 30,
        seed: 1,
        x0: None,
    };
    let trace = run_ms2gd(&problem, &cfg, Some(reference.objective)).unwrap();
    assert!(trace.records.last().unwrap().gap.unwrap() < 1e-9);
    let zeros = trace.x_final.iter().filter(|v| **v == 0.0).count();
    assert!(zeros > 0);
    for (a, b) in trace.x_final.iter().zip(&reference.x) {
        assert!((a - b).abs() < 1e-4);
    }
}
