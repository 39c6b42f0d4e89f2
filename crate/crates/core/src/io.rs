//! File formats.
//!
//! Matrices and samples travel as plain UTF-8 text with LF line endings.
//! A covariance or precision matrix file starts with a line holding the
//! dimension p, followed by p rows of p space-separated values. A sample
//! file starts with "n p" on one line, followed by n observation rows of p
//! values. Floats are written in the shortest form that parses back to the
//! identical bits, so rewriting the same data reproduces the same bytes.
//!
//! Structured artifacts (ground truth echoes, partitions, solve and
//! condition reports) are JSON.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::datagen::{DatagenConfig, GroundTruth};
use crate::error::{Error, Result};
use crate::matrix::{empirical_covariance, SampleMatrix, SymMatrix};
use crate::screening::{Partition, PartitionFamily};

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn parse_f64(token: &str, path: &Path, line: usize) -> Result<f64> {
    token.parse::<f64>().map_err(|_| {
        Error::InvalidInput(format!(
            "{}:{line}: {token:?} is not a number",
            path_str(path)
        ))
    })
}

fn parse_usize(token: &str, path: &Path, line: usize) -> Result<usize> {
    token.parse::<usize>().map_err(|_| {
        Error::InvalidInput(format!(
            "{}:{line}: {token:?} is not a nonnegative integer",
            path_str(path)
        ))
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path_str(path), e))
}

fn write_string(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path_str(path), e))
}

fn row_values(line: &str, expected: usize, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != expected {
        return Err(Error::InvalidInput(format!(
            "{}:{lineno}: {} values on the row, expected {expected}",
            path_str(path),
            tokens.len()
        )));
    }
    tokens
        .iter()
        .map(|t| parse_f64(t, path, lineno))
        .collect()
}

pub fn format_matrix(m: &SymMatrix) -> String {
    let p = m.dim();
    let mut out = String::new();
    writeln!(out, "{p}").unwrap();
    for i in 0..p {
        for j in 0..p {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{}", m.get(i, j)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &SymMatrix) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::InvalidInput(format!(
            "refusing to write non-finite matrix to {}",
            path_str(path)
        )));
    }
    write_string(path, &format_matrix(m))
}

pub fn read_matrix(path: &Path) -> Result<SymMatrix> {
    let content = read_to_string(path)?;
    let mut lines = content.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{}: empty file", path_str(path))))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 1 {
        return Err(Error::InvalidInput(format!(
            "{}:1: matrix header must be a single dimension, got {} tokens",
            path_str(path),
            tokens.len()
        )));
    }
    let p = parse_usize(tokens[0], path, 1)?;
    if p == 0 {
        return Err(Error::InvalidInput(format!(
            "{}:1: dimension must be positive",
            path_str(path)
        )));
    }
    let mut rows = Vec::with_capacity(p);
    for i in 0..p {
        let line = lines.next().ok_or_else(|| {
            Error::InvalidInput(format!(
                "{}: expected {p} rows, found {i}",
                path_str(path)
            ))
        })?;
        rows.push(row_values(line, p, path, i + 2)?);
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::InvalidInput(format!(
            "{}: trailing content after row {p}",
            path_str(path)
        )));
    }
    SymMatrix::from_rows(&rows)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path_str(path))))
}

pub fn format_samples(x: &SampleMatrix) -> String {
    let (n, p) = (x.n(), x.dim());
    let mut out = String::new();
    writeln!(out, "{n} {p}").unwrap();
    for t in 0..n {
        for (j, v) in x.row(t).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_samples(path: &Path, x: &SampleMatrix) -> Result<()> {
    write_string(path, &format_samples(x))
}

pub fn read_samples(path: &Path) -> Result<SampleMatrix> {
    let content = read_to_string(path)?;
    let mut lines = content.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{}: empty file", path_str(path))))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "{}:1: sample header must be \"n p\", got {} tokens",
            path_str(path),
            tokens.len()
        )));
    }
    let n = parse_usize(tokens[0], path, 1)?;
    let p = parse_usize(tokens[1], path, 1)?;
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput(format!(
            "{}:1: n and p must be positive",
            path_str(path)
        )));
    }
    let mut rows = Vec::with_capacity(n);
    for t in 0..n {
        let line = lines.next().ok_or_else(|| {
            Error::InvalidInput(format!(
                "{}: expected {n} rows, found {t}",
                path_str(path)
            ))
        })?;
        rows.push(row_values(line, p, path, t + 2)?);
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::InvalidInput(format!(
            "{}: trailing content after row {n}",
            path_str(path)
        )));
    }
    SampleMatrix::from_rows(rows)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path_str(path))))
}

/// Either raw observations or a precomputed covariance, told apart by the
/// header: one token is a matrix, two is samples.
#[derive(Debug, Clone, PartialEq)]
pub enum InputData {
    Covariance(SymMatrix),
    Samples(SampleMatrix),
}

impl InputData {
    /// Covariance of the input, computing it for samples.
    pub fn into_covariance(self) -> Result<SymMatrix> {
        match self {
            InputData::Covariance(m) => Ok(m),
            InputData::Samples(x) => empirical_covariance(&x),
        }
    }
}

pub fn read_data_file(path: &Path) -> Result<InputData> {
    let content = read_to_string(path)?;
    let header = content
        .lines()
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{}: empty file", path_str(path))))?;
    match header.split_whitespace().count() {
        1 => Ok(InputData::Covariance(read_matrix(path)?)),
        2 => Ok(InputData::Samples(read_samples(path)?)),
        n => Err(Error::InvalidInput(format!(
            "{}:1: header has {n} tokens, expected 1 (matrix) or 2 (samples)",
            path_str(path)
        ))),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize: {e}")))?;
    text.push('\n');
    write_string(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let content = read_to_string(path)?;
    serde_json::from_str(&content)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path_str(path))))
}

/// Echo of how a synthetic dataset was produced, written next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDocument {
    pub config: DatagenConfig,
    pub base_partition: Option<Vec<Vec<usize>>>,
    pub class_blocks: Option<Vec<Vec<Vec<usize>>>>,
}

impl TruthDocument {
    pub fn new(cfg: &DatagenConfig, truth: &GroundTruth) -> Self {
        TruthDocument {
            config: cfg.clone(),
            base_partition: truth
                .base_partition
                .as_ref()
                .map(|b| b.components().to_vec()),
            class_blocks: truth.block_structure.as_ref().map(|fam| {
                fam.classes()
                    .iter()
                    .map(|p| p.components().to_vec())
                    .collect()
            }),
        }
    }
}

/// Screening result: the per-class components along with the penalties and
/// mode that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDocument {
    pub mode: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub p: usize,
    pub classes: usize,
    pub per_class: Vec<ClassPartition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPartition {
    pub class: usize,
    /// Sum of cubed component sizes.
    pub complexity: u64,
    pub components: Vec<Vec<usize>>,
}

impl PartitionDocument {
    pub fn new(mode: &str, lambda1: f64, lambda2: f64, family: &PartitionFamily) -> Self {
        PartitionDocument {
            mode: mode.to_string(),
            lambda1,
            lambda2,
            p: family.dim(),
            classes: family.num_classes(),
            per_class: family
                .classes()
                .iter()
                .enumerate()
                .map(|(class, part)| ClassPartition {
                    class,
                    complexity: part.complexity_estimate(),
                    components: part.components().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_family(&self) -> Result<PartitionFamily> {
        if self.per_class.len() != self.classes {
            return Err(Error::InvalidInput(format!(
                "partition document declares {} classes but lists {}",
                self.classes,
                self.per_class.len()
            )));
        }
        let parts = self
            .per_class
            .iter()
            .map(|cp| Partition::from_components(cp.components.clone(), self.p))
            .collect::<Result<Vec<_>>>()?;
        PartitionFamily::new(parts)
    }
}
