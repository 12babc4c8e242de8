//! Labeled sparse datasets: LibSVM text I/O, synthetic generators and row
//! normalization.
//!
//! LibSVM feature indices are 1-based on disk and 0-based in memory. The
//! conversion happens only in [`parse_libsvm`] and [`write_libsvm`].

use std::io::{self, BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::g17;
use crate::sampling::RngState;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("feature index {index} exceeds dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A sparse feature vector with strictly increasing 0-based indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseRow {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRow {
    /// Builds a row from `(index, value)` pairs, 0-based.
    pub fn new(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self, String> {
        let mut row = SparseRow::default();
        for (index, value) in pairs {
            row.push(index, value)?;
        }
        Ok(row)
    }

    /// Builds a row from a dense slice, skipping exact zeros.
    pub fn from_dense(dense: &[f64]) -> Self {
        let mut row = SparseRow::default();
        for (j, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                row.indices.push(j);
                row.values.push(v);
            }
        }
        row
    }

    fn push(&mut self, index: usize, value: f64) -> Result<(), String> {
        if !value.is_finite() {
            return Err(format!("non-finite value at index {}", index + 1));
        }
        if let Some(&last) = self.indices.last() {
            if index == last {
                return Err(format!("duplicate index {}", index + 1));
            }
            if index < last {
                return Err(format!("index {} follows {}", index + 1, last + 1));
            }
        }
        self.indices.push(index);
        self.values.push(value);
        Ok(())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Largest 0-based index plus one, or 0 for an empty row.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |&j| j + 1)
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.iter().map(|(j, v)| v * x[j]).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `out += scale * self`.
    pub fn axpy(&self, scale: f64, out: &mut [f64]) {
        for (j, v) in self.iter() {
            out[j] += scale * v;
        }
    }

    fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}

/// Rows, labels and feature dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledDataset {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    dim: usize,
}

impl LabeledDataset {
    pub fn new(rows: Vec<SparseRow>, labels: Vec<f64>, dim: usize) -> Result<Self, DataError> {
        if rows.len() != labels.len() {
            return Err(DataError::LengthMismatch {
                rows: rows.len(),
                labels: labels.len(),
            });
        }
        if let Some(needed) = rows.iter().map(SparseRow::min_dim).max() {
            if needed > dim {
                return Err(DataError::IndexOutOfRange { index: needed, dim });
            }
        }
        if let Some(row) = labels.iter().position(|y| !y.is_finite()) {
            return Err(DataError::InvalidRow {
                row,
                reason: "non-finite label".into(),
            });
        }
        Ok(LabeledDataset { rows, labels, dim })
    }

    /// Dense rows with `dim = row length`.
    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self, DataError> {
        let dim = rows.iter().map(Vec::len).max().unwrap_or(0);
        let rows = rows.iter().map(|r| SparseRow::from_dense(r)).collect();
        LabeledDataset::new(rows, labels, dim)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// True if every label is exactly `-1` or `+1`.
    pub fn has_binary_labels(&self) -> bool {
        self.labels.iter().all(|&y| y == 1.0 || y == -1.0)
    }

    pub fn max_row_norm_sq(&self) -> f64 {
        self.rows.iter().map(SparseRow::norm_sq).fold(0.0, f64::max)
    }

    /// Scales every nonzero row to unit Euclidean norm. Zero rows are kept.
    pub fn normalize_rows(mut self) -> Self {
        for row in &mut self.rows {
            let norm = row.norm_sq().sqrt();
            if norm > 0.0 {
                row.scale(1.0 / norm);
            }
        }
        self
    }
}

/// Free-function form of [`LabeledDataset::normalize_rows`].
pub fn normalize_rows(dataset: LabeledDataset) -> LabeledDataset {
    dataset.normalize_rows()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Map label `0` to `-1` so `{0, 1}` files become `{-1, +1}`.
    pub binary_labels: bool,
}

/// Reads LibSVM text: `label idx:val idx:val ...` per line, 1-based strictly
/// increasing indices, `#` comments, blank lines ignored.
///
/// The reader is consumed line by line; only the parsed dataset is retained.
pub fn parse_libsvm<R: BufRead>(mut reader: R, opts: ParseOptions) -> Result<LabeledDataset, DataError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0;
    let mut buf = String::new();
    let mut line_no = 0;

    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let content = match buf.find('#') {
            Some(pos) => &buf[..pos],
            None => &buf[..],
        };
        let mut tokens = content.split_ascii_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let err = |reason: String| DataError::Parse { line: line_no, reason };

        let mut label = parse_real(label_tok).map_err(|_| err(format!("non-numeric label {label_tok:?}")))?;
        if opts.binary_labels && label == 0.0 {
            label = -1.0;
        }

        let mut row = SparseRow::default();
        for pair in tokens {
            let (idx, val) = pair
                .split_once(':')
                .ok_or_else(|| err(format!("malformed pair {pair:?}")))?;
            let idx: i64 = idx.parse().map_err(|_| err(format!("non-integer index {idx:?}")))?;
            if idx <= 0 {
                return Err(err(format!("nonpositive index {idx}")));
            }
            let val = parse_real(val).map_err(|_| err(format!("non-numeric value {val:?}")))?;
            row.push(idx as usize - 1, val).map_err(&err)?;
        }
        dim = dim.max(row.min_dim());
        rows.push(row);
        labels.push(label);
    }

    Ok(LabeledDataset { rows, labels, dim })
}

fn parse_real(tok: &str) -> Result<f64, ()> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(()),
    }
}

/// Writes LibSVM text with `%.17g` numbers so that parsing it back yields an
/// identical dataset.
pub fn write_libsvm<W: Write>(dataset: &LabeledDataset, mut out: W) -> io::Result<()> {
    let mut line = String::new();
    for (row, &label) in dataset.rows.iter().zip(&dataset.labels) {
        line.clear();
        line.push_str(&g17(label));
        for (j, v) in row.iter() {
            line.push(' ');
            line.push_str(&(j + 1).to_string());
            line.push(':');
            line.push_str(&g17(v));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

/// Parameters of a synthetic linear-model dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// Ratio between the largest and smallest feature-scale variance before
    /// row normalization; `1` gives isotropic features.
    pub condition: f64,
    /// Label flip probability (classification) or Gaussian noise standard
    /// deviation (regression).
    pub noise: f64,
    pub seed: u64,
    pub task: Task,
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize, task: Task, seed: u64) -> Self {
        SyntheticSpec {
            n,
            d,
            condition: 1.0,
            noise: 0.0,
            seed,
            task,
        }
    }
}

/// Dense Gaussian features with geometrically decaying column scales, rows
/// scaled to unit norm, labels from a random planted model.
pub fn generate_synthetic(spec: &SyntheticSpec) -> LabeledDataset {
    let mut rng = RngState::new(spec.seed);
    let d = spec.d.max(1);
    let condition = spec.condition.max(1.0);
    let scales: Vec<f64> = (0..d)
        .map(|j| {
            let frac = if d > 1 { j as f64 / (d - 1) as f64 } else { 0.0 };
            condition.powf(-0.5 * frac)
        })
        .collect();

    let mut w_true: Vec<f64> = (0..d).map(|_| rng.inner().sample(StandardNormal)).collect();
    let w_norm = w_true.iter().map(|w| w * w).sum::<f64>().sqrt();
    w_true.iter_mut().for_each(|w| *w /= w_norm);

    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    let mut dense = vec![0.0; d];
    for _ in 0..spec.n {
        for (a, s) in dense.iter_mut().zip(&scales) {
            let z: f64 = rng.inner().sample(StandardNormal);
            *a = s * z;
        }
        let norm = dense.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.0 {
            dense.iter_mut().for_each(|a| *a /= norm);
        }
        let margin: f64 = dense.iter().zip(&w_true).map(|(a, w)| a * w).sum();
        let label = match spec.task {
            Task::Classification => {
                let y = if margin >= 0.0 { 1.0 } else { -1.0 };
                if spec.noise > 0.0 && rng.uniform() < spec.noise {
                    -y
                } else {
                    y
                }
            }
            Task::Regression => {
                let z: f64 = rng.inner().sample(StandardNormal);
                margin + spec.noise * z
            }
        };
        rows.push(SparseRow::from_dense(&dense));
        labels.push(label);
    }
    LabeledDataset { rows, labels, dim: d }
}
