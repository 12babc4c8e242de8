//! Parsing of `--solver` values.
//!
//! ```text
//! ms2gd:b=8,h=0.1,m=1000
//! ms2gd:b=8,auto
//! s2gd:h=0.1,m=1000          (mS2GD with b = 1)
//! sgd:b=1,h=0.05,passes=30
//! ```

use std::collections::BTreeMap;

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Hyper {
    Explicit { stepsize: f64, inner_max: usize },
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverSpec {
    Ms2gd {
        batch: usize,
        hyper: Hyper,
    },
    Sgd {
        batch: usize,
        stepsize: f64,
        passes: Option<f64>,
    },
}

impl SolverSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            SolverSpec::Ms2gd { .. } => "ms2gd",
            SolverSpec::Sgd { .. } => "sgd",
        }
    }

    pub fn batch(&self) -> usize {
        match *self {
            SolverSpec::Ms2gd { batch, .. } | SolverSpec::Sgd { batch, .. } => batch,
        }
    }
}

pub fn parse_solver(text: &str) -> Result<SolverSpec> {
    let bad = |msg: String| CliError::Usage(format!("--solver {text:?}: {msg}"));
    let (name, rest) = text.split_once(':').unwrap_or((text, ""));
    let mut params = BTreeMap::new();
    let mut auto = false;
    for token in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match token.split_once('=') {
            Some((k, v)) => {
                if params.insert(k.trim(), v.trim()).is_some() {
                    return Err(bad(format!("{k} given twice")));
                }
            }
            None if token == "auto" => auto = true,
            None => return Err(bad(format!("expected key=value, got {token:?}"))),
        }
    }

    let mut take = |key: &str| params.remove(key);
    let batch = |v: Option<&str>, default: Option<usize>| -> Result<usize> {
        match v {
            Some(v) => v
                .parse::<usize>()
                .ok()
                .filter(|&b| b >= 1)
                .ok_or_else(|| bad(format!("b must be a positive integer, got {v:?}"))),
            None => default.ok_or_else(|| bad("b is required".into())),
        }
    };
    let real = |key: &str, v: &str| -> Result<f64> {
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| bad(format!("{key} must be a finite number, got {v:?}")))
    };

    let spec = match name {
        "ms2gd" | "s2gd" => {
            let batch = if name == "s2gd" {
                match take("b") {
                    None | Some("1") => 1,
                    Some(v) => return Err(bad(format!("s2gd always uses b=1, got b={v}"))),
                }
            } else {
                batch(take("b"), None)?
            };
            let h = take("h");
            let m = take("m");
            let hyper = match (auto, h, m) {
                (true, None, None) => Hyper::Auto,
                (true, _, _) => return Err(bad("auto cannot be combined with h or m".into())),
                (false, Some(h), Some(m)) => {
                    let stepsize = real("h", h)?;
                    let inner_max = m
                        .parse::<usize>()
                        .ok()
                        .filter(|&m| m >= 1)
                        .ok_or_else(|| bad(format!("m must be a positive integer, got {m:?}")))?;
                    Hyper::Explicit { stepsize, inner_max }
                }
                (false, _, _) => return Err(bad("give both h and m, or auto".into())),
            };
            SolverSpec::Ms2gd { batch, hyper }
        }
        "sgd" => {
            if auto {
                return Err(bad("sgd has no auto mode; its stepsize is required".into()));
            }
            let batch = batch(take("b"), Some(1))?;
            let stepsize = match take("h") {
                Some(h) => real("h", h)?,
                None => return Err(bad("sgd needs an explicit stepsize h".into())),
            };
            if stepsize < 0.0 {
                return Err(bad("h must be nonnegative".into()));
            }
            let passes = match take("passes") {
                Some(p) => {
                    let p = real("passes", p)?;
                    if p <= 0.0 {
                        return Err(bad("passes must be positive".into()));
                    }
                    Some(p)
                }
                None => None,
            };
            SolverSpec::Sgd {
                batch,
                stepsize,
                passes,
            }
        }
        other => return Err(bad(format!("unknown solver {other:?} (expected ms2gd, s2gd or sgd)"))),
    };
    if let Some(key) = params.keys().next() {
        return Err(bad(format!("unknown parameter {key:?}")));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_form() {
        assert_eq!(
            parse_solver("ms2gd:b=8,h=0.5,m=100").unwrap(),
            SolverSpec::Ms2gd {
                batch: 8,
                hyper: Hyper::Explicit {
                    stepsize: 0.5,
                    inner_max: 100
                }
            }
        );
        assert_eq!(
            parse_solver("ms2gd:b=4,auto").unwrap(),
            SolverSpec::Ms2gd {
                batch: 4,
                hyper: Hyper::Auto
            }
        );
        assert_eq!(parse_solver("s2gd:auto").unwrap().batch(), 1);
        assert_eq!(
            parse_solver("sgd:h=0.01,passes=3").unwrap(),
            SolverSpec::Sgd {
                batch: 1,
                stepsize: 0.01,
                passes: Some(3.0)
            }
        );
    }

    #[test]
    fn rejects_malformed() {
        for text in [
            "adam:b=1",
            "ms2gd:b=8",
            "ms2gd:h=1,m=2",
            "ms2gd:b=0,h=1,m=2",
            "ms2gd:b=8,h=1,m=0",
            "ms2gd:b=8,auto,h=1",
            "ms2gd:b=8,h=1,m=2,x=3",
            "ms2gd:b=8,h=1,h=2,m=2",
            "s2gd:b=2,auto",
            "sgd:b=1",
            "sgd:b=1,h=-1",
            "sgd:b=1,h=nan",
            "sgd:b=1,h=1,passes=0",
            "sgd:auto",
        ] {
            assert!(parse_solver(text).is_err(), "{text}");
        }
    }
}
