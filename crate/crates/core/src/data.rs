//! Datasets: the libsvm text format and deterministic synthetic generators.
//!
//! libsvm grammar (one example per line, blank lines ignored):
//!
//! ```text
//! line  := label ( ws+ index ':' value )* ws*
//! label := f64           (exactly -1 or +1 in classification mode)
//! index := [1-9][0-9]*   (1-based, strictly increasing within a line)
//! value := f64           (finite)
//! ```
//!
//! Synthetic data uses `ChaCha8Rng` seeded with `seed_from_u64(seed)`, so a
//! given seed yields the same stream on every platform.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Bounds;
use crate::problems::QuadraticProblem;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: label {value} is not -1 or +1")]
    Label { line: usize, value: f64 },
    #[error("dataset is empty")]
    Empty,
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKind {
    Classification,
    Regression,
}

/// One sparse example; `indices` are 0-based and strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .unzip();
        Self { indices, values }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<SparseRow>,
    pub labels: Vec<f64>,
    pub n_features: usize,
}

impl Dataset {
    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Self {
        let n_features = rows.first().map_or(0, Vec::len);
        Self {
            rows: rows.iter().map(|r| SparseRow::from_dense(r)).collect(),
            labels,
            n_features,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut d = vec![0.0; self.n_features];
                for (&i, &v) in r.indices.iter().zip(&r.values) {
                    d[i] = v;
                }
                d
            })
            .collect()
    }

    pub fn max_row_norm(&self) -> f64 {
        self.rows.iter().map(SparseRow::norm).fold(0.0, f64::max)
    }

    /// Scale every nonzero row to unit Euclidean norm.
    pub fn normalize_rows(&mut self) {
        for row in &mut self.rows {
            let norm = row.norm();
            if norm > 0.0 {
                row.values.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
}

pub fn parse_libsvm(path: impl AsRef<Path>, kind: LabelKind) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_libsvm_str(&text, kind)
}

pub fn parse_libsvm_str(text: &str, kind: LabelKind) -> Result<Dataset, DataError> {
    let mut data = Dataset::default();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = tokens_with_columns(line);
        let (col, label_tok) = tokens.next().expect("non-blank line has a token");
        let label: f64 = parse_f64(label_tok, line_no, col, "label")?;
        if kind == LabelKind::Classification && label != 1.0 && label != -1.0 {
            return Err(DataError::Label {
                line: line_no,
                value: label,
            });
        }
        let mut row = SparseRow::default();
        for (col, tok) in tokens {
            let (idx_tok, val_tok) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                line: line_no,
                column: col,
                message: format!("expected <index>:<value>, found {tok:?}"),
            })?;
            let index: usize = match idx_tok.parse() {
                Ok(i) if i >= 1 && !idx_tok.starts_with('+') => i,
                _ => {
                    return Err(DataError::Parse {
                        line: line_no,
                        column: col,
                        message: format!("feature index {idx_tok:?} is not a positive integer"),
                    })
                }
            };
            if row.indices.last().is_some_and(|&last| index - 1 <= last) {
                return Err(DataError::Parse {
                    line: line_no,
                    column: col,
                    message: format!("feature index {index} is not strictly increasing"),
                });
            }
            let value = parse_f64(val_tok, line_no, col + idx_tok.len() + 1, "value")?;
            row.indices.push(index - 1);
            row.values.push(value);
            data.n_features = data.n_features.max(index);
        }
        data.rows.push(row);
        data.labels.push(label);
    }
    if kind == LabelKind::Classification && data.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(data)
}

fn tokens_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    line.split_ascii_whitespace().map(move |tok| {
        let offset = tok.as_ptr() as usize - line.as_ptr() as usize;
        (offset + 1, tok)
    })
}

fn parse_f64(tok: &str, line: usize, column: usize, what: &str) -> Result<f64, DataError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::Parse {
            line,
            column,
            message: format!("{what} {tok:?} is not a finite number"),
        }),
    }
}

/// Serialize in the libsvm grammar; numbers use the shortest representation
/// that parses back to the same `f64`.
pub fn write_libsvm(data: &Dataset) -> String {
    let mut out = String::new();
    for (row, label) in data.rows.iter().zip(&data.labels) {
        let _ = write!(out, "{label}");
        for (i, v) in row.indices.iter().zip(&row.values) {
            let _ = write!(out, " {}:{}", i + 1, v);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Gaussian features labelled by a random hyperplane; points closer than
    /// `margin` to the hyperplane are redrawn.
    GaussianMargin {
        n: usize,
        d: usize,
        seed: u64,
        #[serde(default = "default_margin")]
        margin: f64,
    },
    /// A `rows × cols` Gaussian matrix whose first two rows satisfy
    /// A₁ = A₂ + δe₁.
    CorrelatedRows {
        delta: f64,
        rows: usize,
        cols: usize,
        seed: u64,
    },
    /// ½xᵀdiag(1..n)x − 1ᵀx on [0, 1]ⁿ.
    DiagonalQuadratic { n: usize },
}

fn default_margin() -> f64 {
    0.1
}

#[derive(Debug, Clone)]
pub enum Synthetic {
    Dataset(Dataset),
    Matrix(Vec<Vec<f64>>),
    Quadratic(QuadraticProblem),
}

pub fn generate_synthetic(spec: &GeneratorSpec) -> Result<Synthetic, DataError> {
    match *spec {
        GeneratorSpec::GaussianMargin { n, d, seed, margin } => {
            if n == 0 || d == 0 {
                return Err(DataError::InvalidSpec("gaussian-margin needs n, d ≥ 1".into()));
            }
            if !(margin >= 0.0) || margin >= 1.0 {
                return Err(DataError::InvalidSpec("margin must lie in [0, 1)".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..d).map(|_| rng.sample(StandardNormal)).collect()
            };
            let mut normal_dir = normal(&mut rng);
            let len = normal_dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            normal_dir.iter_mut().for_each(|v| *v /= len);
            let mut rows = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            while rows.len() < n {
                let a = normal(&mut rng);
                let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let side: f64 = a.iter().zip(&normal_dir).map(|(x, y)| x * y).sum();
                if norm == 0.0 || side.abs() < margin * norm {
                    continue;
                }
                labels.push(if side >= 0.0 { 1.0 } else { -1.0 });
                rows.push(a);
            }
            Ok(Synthetic::Dataset(Dataset::from_dense(&rows, labels)))
        }
        GeneratorSpec::CorrelatedRows {
            delta,
            rows,
            cols,
            seed,
        } => {
            if rows < 2 || cols == 0 || !(delta.is_finite() && delta != 0.0) {
                return Err(DataError::InvalidSpec(
                    "correlated-rows needs rows ≥ 2, cols ≥ 1 and a finite nonzero delta".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            m[0] = m[1].clone();
            m[0][0] += delta;
            Ok(Synthetic::Matrix(m))
        }
        GeneratorSpec::DiagonalQuadratic { n } => {
            if n == 0 {
                return Err(DataError::InvalidSpec("diagonal-quadratic needs n ≥ 1".into()));
            }
            let diag: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            let bounds = Bounds::uniform(n, 0.0, 1.0).expect("unit box is valid");
            let q = QuadraticProblem::diagonal(&diag, vec![-1.0; n], bounds)
                .map_err(|e| DataError::InvalidSpec(e.to_string()))?;
            Ok(Synthetic::Quadratic(q))
        }
    }
}
