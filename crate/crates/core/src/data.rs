//! Dataset sources: LIBSVM text files and seeded synthetic classification data.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::SparseRow;
use crate::problem::Dataset;

/// How raw labels become the `±1` targets of a binary loss.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LabelMapping {
    /// Keep `{−1, +1}`; any other two-valued set maps smaller → −1, larger → +1.
    #[default]
    Auto,
    /// Keep labels as written.
    Raw,
    /// This value → +1, everything else → −1.
    Positive(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LibsvmOptions {
    pub labels: LabelMapping,
    /// Feature count; inferred from the largest index when `None`.
    pub dimension: Option<usize>,
}

pub fn parse_libsvm(path: impl AsRef<Path>, options: &LibsvmOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    parse_libsvm_str(&text, path, options)
}

/// Parses LIBSVM text; `path` is only used in error messages.
pub fn parse_libsvm_str(text: &str, path: &Path, options: &LibsvmOptions) -> Result<Dataset> {
    let err = |line: usize, column: usize, message: String| Error::Parse {
        path: PathBuf::from(path),
        line,
        column,
        message,
    };
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = tokens_with_columns(content);
        let Some((col, label_tok)) = tokens.next() else { continue };
        let label: f64 = label_tok
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(line_no, col, format!("bad label `{label_tok}`")))?;
        let mut pairs = Vec::new();
        for (col, tok) in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(line_no, col, format!("expected index:value, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(line_no, col, format!("bad feature index `{idx}`")))?;
            if idx == 0 {
                return Err(err(line_no, col, "feature indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| err(line_no, col + idx.to_string().len() + 1, format!("bad value `{val}`")))?;
            max_index = max_index.max(idx);
            pairs.push((idx - 1, val));
        }
        let row = SparseRow::from_pairs(pairs)
            .ok_or_else(|| err(line_no, 1, "duplicate feature index".into()))?;
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::InvalidDataset(format!("{}: no observations", path.display())));
    }
    let d = match options.dimension {
        Some(d) if d < max_index => {
            return Err(Error::InvalidDataset(format!(
                "dimension override {d} is below the largest index {max_index}"
            )))
        }
        Some(d) => d,
        None => max_index.max(1),
    };
    map_labels(&mut labels, options.labels)?;
    Dataset::new(rows, labels, d)
}

fn tokens_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let start = rest.find(|c: char| !c.is_whitespace())?;
        let tail = &rest[start..];
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        let token = &tail[..len];
        let column = offset + start + 1;
        offset += start + len;
        rest = &tail[len..];
        Some((column, token))
    })
}

fn map_labels(labels: &mut [f64], mapping: LabelMapping) -> Result<()> {
    match mapping {
        LabelMapping::Raw => {}
        LabelMapping::Positive(p) => {
            for b in labels.iter_mut() {
                *b = if *b == p { 1.0 } else { -1.0 };
            }
        }
        LabelMapping::Auto => {
            let distinct: BTreeSet<u64> = labels.iter().map(|b| b.to_bits()).collect();
            let mut values: Vec<f64> = distinct.into_iter().map(f64::from_bits).collect();
            values.sort_by(f64::total_cmp);
            if values.iter().all(|&v| v == 1.0 || v == -1.0) {
                return Ok(());
            }
            if values.len() != 2 {
                return Err(Error::InvalidDataset(format!(
                    "cannot map {} distinct labels to +-1",
                    values.len()
                )));
            }
            let low = values[0];
            for b in labels.iter_mut() {
                *b = if *b == low { -1.0 } else { 1.0 };
            }
        }
    }
    Ok(())
}

/// Seeded synthetic binary classification data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Multiplier on the first row.
    pub skew: f64,
    /// Expected row norm before the skew (entries are `N(0, row_scale²/d)`).
    pub row_scale: f64,
    pub flip_rate: f64,
}

impl SynthSpec {
    pub fn new(n: usize, d: usize, seed: u64, skew: f64) -> Self {
        Self {
            n,
            d,
            seed,
            skew,
            row_scale: 1.0,
            flip_rate: 0.1,
        }
    }

    pub fn with_row_scale(mut self, row_scale: f64) -> Self {
        self.row_scale = row_scale;
        self
    }
}

/// Gaussian rows, one scaled by `skew`, labels `sign(aᵀw)` for a planted
/// `w` with a fraction `flip_rate` flipped.
pub fn synth_logistic(spec: &SynthSpec) -> Result<Dataset> {
    let SynthSpec { n, d, seed, skew, row_scale, flip_rate } = *spec;
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig("synthetic data needs n, d >= 1".into()));
    }
    if !(skew > 0.0 && skew.is_finite() && row_scale > 0.0 && row_scale.is_finite()) {
        return Err(Error::InvalidConfig("skew and row_scale must be positive".into()));
    }
    if !(0.0..=1.0).contains(&flip_rate) {
        return Err(Error::InvalidConfig("flip_rate must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entry = Normal::new(0.0, row_scale / (d as f64).sqrt())
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let mut a: Vec<f64> = (0..d).map(|_| entry.sample(&mut rng)).collect();
        if j == 0 {
            a.iter_mut().for_each(|v| *v *= skew);
        }
        let margin: f64 = a.iter().zip(&w).map(|(x, y)| x * y).sum();
        let mut b = if margin >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < flip_rate {
            b = -b;
        }
        rows.push(SparseRow::from_dense(&a));
        labels.push(b);
    }
    Dataset::new(rows, labels, d)
}
