//! Turns [`ProblemArgs`] into a [`CompositeProblem`].

use std::fs::File;
use std::io::BufReader;

use ms2gd::data::{generate_synthetic, parse_libsvm, ParseOptions};
use ms2gd::problem::{CompositeProblem, Loss, Regularizer};
use ms2gd::{LabeledDataset, SyntheticSpec, Task};
use serde::Serialize;

use crate::args::{LossArg, ProblemArgs, RegArg};
use crate::{CliError, Result};

/// Parses `n=500,d=20,seed=3,noise=0.1,condition=10`. Leading bare values
/// are taken as `n`, `d`, `seed` in that order.
pub fn parse_synthetic(text: &str, task: Task) -> Result<SyntheticSpec> {
    let bad = |msg: String| CliError::Usage(format!("--synthetic {text:?}: {msg}"));
    let mut spec = SyntheticSpec::new(0, 0, task, 0);
    let positional = ["n", "d", "seed"];
    let mut next_positional = 0;
    for token in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (key, value) = match token.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => {
                let key = *positional
                    .get(next_positional)
                    .ok_or_else(|| bad(format!("unexpected bare value {token:?}")))?;
                next_positional += 1;
                (key, token)
            }
        };
        let int = || {
            value
                .parse::<u64>()
                .map_err(|_| bad(format!("{key} must be a nonnegative integer")))
        };
        let real = || value.parse::<f64>().map_err(|_| bad(format!("{key} must be a number")));
        match key {
            "n" => spec.n = int()? as usize,
            "d" => spec.d = int()? as usize,
            "seed" => spec.seed = int()?,
            "noise" => spec.noise = real()?,
            "condition" => spec.condition = real()?,
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    if spec.n == 0 || spec.d == 0 {
        return Err(bad("n and d must be positive".into()));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(bad("noise must be nonnegative".into()));
    }
    if !(spec.condition >= 1.0 && spec.condition.is_finite()) {
        return Err(bad("condition must be at least 1".into()));
    }
    Ok(spec)
}

/// Describes the built problem in manifests and reference files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSummary {
    pub source: String,
    pub n: usize,
    pub d: usize,
    pub loss: &'static str,
    pub regularizer: Regularizer,
    pub l2_smooth: f64,
    pub lipschitz: f64,
    pub mu: f64,
    pub nu_f: f64,
    pub nu_r: f64,
}

pub fn load_dataset(args: &ProblemArgs) -> Result<(LabeledDataset, String)> {
    let task = match args.loss {
        LossArg::Logistic => Task::Classification,
        LossArg::Ridge => Task::Regression,
    };
    let (data, source) = match (&args.dataset, &args.synthetic) {
        (Some(path), _) => {
            let file = File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let opts = ParseOptions {
                binary_labels: args.zero_one_labels,
            };
            let data = parse_libsvm(BufReader::new(file), opts)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            (data, path.display().to_string())
        }
        (None, Some(text)) => {
            let spec = parse_synthetic(text, task)?;
            (generate_synthetic(&spec), format!("synthetic:{text}"))
        }
        (None, None) => return Err(CliError::Usage("one of --dataset or --synthetic is required".into())),
    };
    if data.is_empty() {
        return Err(CliError::Usage(format!("{source}: no rows")));
    }
    let data = if args.normalize { data.normalize_rows() } else { data };
    Ok((data, source))
}

pub fn build_problem(args: &ProblemArgs) -> Result<(CompositeProblem, ProblemSummary)> {
    let (data, source) = load_dataset(args)?;
    let n = data.len();
    let lambda = args.lambda.unwrap_or(1.0 / n as f64);
    let regularizer = match args.reg {
        RegArg::None => Regularizer::Zero,
        RegArg::L1 => Regularizer::L1 { lambda },
        RegArg::L2 => Regularizer::L2 { lambda },
        RegArg::En => Regularizer::ElasticNet {
            l1: lambda,
            l2: args.lambda2,
        },
    };
    let (loss, loss_name) = match args.loss {
        LossArg::Logistic => (Loss::Logistic, "logistic"),
        LossArg::Ridge => (Loss::Squared, "ridge"),
    };
    let problem = CompositeProblem::linear(data, loss, args.l2_smooth, regularizer)
        .map_err(|e| CliError::Usage(format!("cannot build problem: {e}")))?;
    let c = problem.constants();
    let summary = ProblemSummary {
        source,
        n: problem.n(),
        d: problem.dim(),
        loss: loss_name,
        regularizer,
        l2_smooth: args.l2_smooth,
        lipschitz: c.lipschitz,
        mu: c.mu,
        nu_f: c.nu_f,
        nu_r: c.nu_r,
    };
    Ok((problem, summary))
}
