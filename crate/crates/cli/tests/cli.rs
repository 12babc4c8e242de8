use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ms2gd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ms2gd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).expect("valid JSON")
}

fn train_args<'a>(out_dir: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "train",
        "--synthetic",
        "n=200,d=10,seed=4,noise=0.1",
        "--loss",
        "ridge",
        "--lambda",
        "0.01",
        "--epochs",
        "4",
        "--out-dir",
        out_dir,
    ];
    args.extend_from_slice(extra);
    args
}

fn dir_str(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn train_writes_one_csv_per_run_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ms2gd(&train_args(
        dir_str(tmp.path()),
        &[
            "--solver",
            "ms2gd:b=8,h=0.2,m=100",
            "--solver",
            "ms2gd:b=1,h=0.2,m=400",
            "--solver",
            "sgd:b=1,h=0.05,passes=3",
            "--reference-tol",
            "1e-12",
        ],
    ));
    assert!(out.status.success(), "{}", stderr(&out));

    let mut names: Vec<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "00_ms2gd_b8_seed0.csv",
            "00_ms2gd_b8_seed0_ideal.csv",
            "01_ms2gd_b1_seed0.csv",
            "01_ms2gd_b1_seed0_ideal.csv",
            "02_sgd_b1_seed0.csv",
            "02_sgd_b1_seed0_ideal.csv",
            "manifest.json",
        ]
    );

    let csv = fs::read_to_string(tmp.path().join("00_ms2gd_b8_seed0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,effective_passes,objective,gap,evaluations,seconds");
    assert_eq!(lines.len(), 1 + 5);
    let mut prev_passes = -1.0;
    for (k, line) in lines[1..].iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], k.to_string());
        let passes: f64 = cells[1].parse().unwrap();
        let evals: f64 = cells[4].parse().unwrap();
        assert!(passes >= prev_passes);
        assert_eq!(passes, evals / 200.0);
        assert!(cells[3].parse::<f64>().is_ok());
        assert_eq!(cells[5], "");
        prev_passes = passes;
    }

    let ideal = fs::read_to_string(tmp.path().join("00_ms2gd_b8_seed0_ideal.csv")).unwrap();
    for (seq, par) in csv.lines().zip(ideal.lines()).skip(2) {
        let s: f64 = seq.split(',').nth(1).unwrap().parse().unwrap();
        let p: f64 = par.split(',').nth(1).unwrap().parse().unwrap();
        assert!(p < s);
    }

    let manifest = json(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap());
    let runs = manifest["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    assert_eq!(runs[0]["feasibility"], "ok");
    assert!(runs[0]["rate_bound"].as_f64().unwrap() < 1.0);
    assert_eq!(runs[2]["kind"], "sgd");
    assert_eq!(runs[2]["steps"], 600);
    assert_eq!(manifest["problem"]["n"], 200);
}

#[test]
fn repeated_train_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let extra = [
        "--solver",
        "ms2gd:b=4,auto",
        "--rho-target",
        "0.5",
        "--seed",
        "3",
        "--seed",
        "9",
    ];
    for dir in [&a, &b] {
        let out = ms2gd(&train_args(dir_str(dir.path()), &extra));
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for name in ["00_ms2gd_b4_seed3.csv", "00_ms2gd_b4_seed9_ideal.csv", "manifest.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn timing_fills_seconds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ms2gd(&train_args(
        dir_str(tmp.path()),
        &["--solver", "s2gd:h=0.1,m=50", "--timing"],
    ));
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("00_ms2gd_b1_seed0.csv")).unwrap();
    for line in csv.lines().skip(1) {
        assert!(line.rsplit(',').next().unwrap().parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn json_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ms2gd(&train_args(
        dir_str(tmp.path()),
        &["--solver", "s2gd:h=0.1,m=50", "--format", "json"],
    ));
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = json(&fs::read_to_string(tmp.path().join("00_ms2gd_b1_seed0.json")).unwrap());
    let records = trace.as_array().unwrap();
    assert_eq!(records.len(), 5);
    assert!(records[0]["gap"].is_null());
    assert!(records[0]["seconds"].is_null());
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = dir_str(tmp.path());
    for extra in [
        vec!["--solver", "adam:b=1"],
        vec!["--solver", "ms2gd:b=8,auto"],
        vec!["--solver", "ms2gd:b=500,h=0.1,m=10"],
        vec!["--solver", "sgd:b=1"],
        vec!["--solver", "s2gd:h=0.1,m=5", "--reference-tol", "0"],
    ] {
        let out = ms2gd(&train_args(dir, &extra));
        assert_eq!(out.status.code(), Some(2), "{extra:?}: {}", stderr(&out));
    }
    let out = ms2gd(&["train", "--solver", "s2gd:h=0.1,m=5", "--out-dir", dir]);
    assert_eq!(out.status.code(), Some(2));
    let out = ms2gd(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_stepsize_names_the_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ms2gd(&train_args(dir_str(tmp.path()), &["--solver", "ms2gd:b=1,h=5,m=10"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("stepsize_condition"), "{}", stderr(&out));
}

#[test]
fn divergence_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ms2gd(&train_args(
        dir_str(tmp.path()),
        &[
            "--solver",
            "ms2gd:b=1,h=100,m=50",
            "--allow-infeasible",
            "--epochs",
            "40",
        ],
    ));
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged at epoch"));
}

#[test]
fn auto_reports_the_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ms2gd(&train_args(
        dir_str(tmp.path()),
        &[
            "--solver",
            "ms2gd:b=1,auto",
            "--rho-target",
            "0.01",
            "--m-cap",
            "100",
            "--epochs",
            "1",
        ],
    ));
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("capped at 100"), "{}", stderr(&out));
    let manifest = json(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap());
    assert_eq!(manifest["runs"][0]["m_capped"], true);
    assert_eq!(manifest["runs"][0]["inner_max"], 100);
}

#[test]
fn plan_examples() {
    let out = ms2gd(&[
        "plan",
        "--rho-target",
        "0.01",
        "-b",
        "1",
        "--n",
        "1000",
        "--mu",
        "0.001",
    ]);
    assert!(out.status.success());
    let plan = json(&stdout(&out));
    assert!((plan["h_star"].as_f64().unwrap() - 1.2376e-3).abs() < 1e-7);
    assert_eq!(plan["regime"], "uncapped");
    for key in [
        "h_tilde",
        "h_star",
        "m_star_real",
        "m_star_int",
        "regime",
        "predicted_rho",
    ] {
        assert!(!plan[key].is_null(), "{key}");
    }

    let out = ms2gd(&[
        "plan",
        "--rho-target",
        "0.1",
        "-b",
        "1000",
        "--n",
        "1000",
        "--mu",
        "0.001",
    ]);
    assert_eq!(json(&stdout(&out))["regime"], "degenerate_alpha_zero");

    let out = ms2gd(&["plan", "--rho-target", "1.5", "-b", "1", "--n", "1000", "--mu", "0.001"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn speedup_curve_shape() {
    let out = ms2gd(&["speedup", "--rho-target", "0.01", "--n", "1000", "--mu", "0.001"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(text.lines().next().unwrap(), "b,h_star,m_star,work_ratio,regime");
    assert_eq!(rows.len(), 1000);
    let first_capped = rows.iter().position(|r| r[4] != "uncapped").unwrap();
    assert!(rows[..first_capped].iter().all(|r| r[3].parse::<f64>().unwrap() >= 1.0));
    assert!(rows[first_capped..].iter().all(|r| r[4] != "uncapped"));

    let out = ms2gd(&[
        "speedup",
        "--rho-target",
        "0.01",
        "--n",
        "1000",
        "--mu",
        "0.001",
        "--b-max",
        "1",
    ]);
    assert_eq!(
        stdout(&out),
        "b,h_star,m_star,work_ratio,regime\n1,0.0012376237547935022,161600000.99009898,1,uncapped\n"
    );

    let out = ms2gd(&[
        "speedup",
        "--rho-target",
        "0.5",
        "--n",
        "10",
        "--mu",
        "0.1",
        "--b-max",
        "11",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).ends_with("11,,,,error\n"));
}

#[test]
fn reference_solves_one_dimensional_ridge() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("sym.libsvm");
    fs::write(&data, "1 1:1\n-1 1:-1\n").unwrap();
    let out_dir = tmp.path().join("ref");
    let args = [
        "reference",
        "--dataset",
        data.to_str().unwrap(),
        "--loss",
        "ridge",
        "--lambda",
        "0.5",
        "--tol",
        "1e-14",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ];
    let first = ms2gd(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    let r = json(&stdout(&first));
    assert_eq!(r["status"], "converged");
    let x: f64 = fs::read_to_string(out_dir.join("xstar.txt"))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((x - 1.0 / 1.5).abs() < 1e-6);
    let second = ms2gd(&args);
    assert_eq!(first.stdout, second.stdout);

    let mut bad = args.to_vec();
    bad[8] = "0";
    assert_eq!(ms2gd(&bad).status.code(), Some(2));

    let train_dir = tmp.path().join("train");
    let reference = out_dir.join("reference.json");
    let out = ms2gd(&[
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--loss",
        "ridge",
        "--lambda",
        "0.5",
        "--solver",
        "ms2gd:b=2,h=0.5,m=5",
        "--reference",
        reference.to_str().unwrap(),
        "--out-dir",
        train_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(train_dir.join("00_ms2gd_b2_seed0.csv")).unwrap();
    let gap: f64 = csv.lines().last().unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(gap.abs() < 1e-12);
}

#[test]
fn reference_with_wrong_shape_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let ref_dir = tmp.path().join("ref");
    let out = ms2gd(&[
        "reference",
        "--synthetic",
        "n=30,d=3",
        "--loss",
        "ridge",
        "--tol",
        "1e-10",
        "--out-dir",
        ref_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let reference = ref_dir.join("reference.json");
    let out = ms2gd(&train_args(
        tmp.path().join("t").to_str().unwrap(),
        &["--solver", "s2gd:h=0.1,m=5", "--reference", reference.to_str().unwrap()],
    ));
    assert_eq!(out.status.code(), Some(2));
}
