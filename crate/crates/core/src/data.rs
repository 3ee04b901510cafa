//! Datasets, the sparse multi-label text format, seeded splitting and
//! single-positive masking.
//!
//! On disk every instance is one line:
//!
//! ```text
//! <labels> <idx>:<val> <idx>:<val> ...
//! ```
//!
//! `<labels>` is a comma-separated list of 1-based class indices, or a lone
//! `,` when the instance has no relevant label. Feature indices are 1-based
//! and unlisted features are zero. The single-positive format replaces the
//! label list with the one observed class (`<gamma>`, also 1-based).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::BufRead;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CrispError, Result};

/// Ground-truth view: features plus the full binary label matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelDataset {
    features: Array2<f64>,
    labels: Array2<u8>,
}

impl MultiLabelDataset {
    pub fn new(features: Array2<f64>, labels: Array2<u8>) -> Result<Self> {
        let (n, q) = features.dim();
        let (n_labels, c) = labels.dim();
        if n == 0 || q == 0 || c == 0 {
            return Err(CrispError::EmptyInput("dataset needs n, q, c >= 1"));
        }
        if n_labels != n {
            return Err(CrispError::shape(
                format!("{n} label rows"),
                format!("{n_labels} label rows"),
            ));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(CrispError::InvalidConfig("non-finite feature value".into()));
        }
        if labels.iter().any(|&v| v > 1) {
            return Err(CrispError::InvalidConfig("labels must be 0 or 1".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Array2<u8> {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn q(&self) -> usize {
        self.features.ncols()
    }

    pub fn c(&self) -> usize {
        self.labels.ncols()
    }

    /// Fraction of instances carrying each label.
    pub fn label_frequencies(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.labels
            .axis_iter(Axis(1))
            .map(|col| col.iter().map(|&v| v as f64).sum::<f64>() / n)
            .collect()
    }

    /// Rows `idx` in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            self.features.select(Axis(0), idx),
            self.labels.select(Axis(0), idx),
        )
    }

    /// Serialises into the sparse text format, one line per instance.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (x, y) in self.features.outer_iter().zip(self.labels.outer_iter()) {
            let labels: Vec<String> = y
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 1)
                .map(|(j, _)| (j + 1).to_string())
                .collect();
            if labels.is_empty() {
                out.push(',');
            } else {
                out.push_str(&labels.join(","));
            }
            write_sparse_row(&mut out, x);
            out.push('\n');
        }
        out
    }
}

/// Training view: features plus the single observed positive per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePositiveDataset {
    features: Array2<f64>,
    observed: Vec<usize>,
    c: usize,
}

impl SinglePositiveDataset {
    pub fn new(features: Array2<f64>, observed: Vec<usize>, c: usize) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 || c == 0 {
            return Err(CrispError::EmptyInput("dataset needs n, q, c >= 1"));
        }
        if observed.len() != features.nrows() {
            return Err(CrispError::shape(
                format!("{} observed labels", features.nrows()),
                observed.len(),
            ));
        }
        if let Some(&bad) = observed.iter().find(|&&g| g >= c) {
            return Err(CrispError::InvalidConfig(format!(
                "observed label {bad} out of range for {c} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(CrispError::InvalidConfig("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            observed,
            c,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// Observed class index per instance (0-based).
    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn n(&self) -> usize {
        self.observed.len()
    }

    pub fn q(&self) -> usize {
        self.features.ncols()
    }

    pub fn c(&self) -> usize {
        self.c
    }

    /// The one-hot `l` vectors as an n×c matrix.
    pub fn one_hot(&self) -> Array2<u8> {
        let mut l = Array2::zeros((self.n(), self.c));
        for (i, &g) in self.observed.iter().enumerate() {
            l[[i, g]] = 1;
        }
        l
    }

    /// Indices of the instances whose observed label is `j`.
    pub fn positive_set(&self, j: usize) -> Vec<usize> {
        positive_set(self, j)
    }

    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            self.features.select(Axis(0), idx),
            idx.iter().map(|&i| self.observed[i]).collect(),
            self.c,
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (x, &g) in self.features.outer_iter().zip(&self.observed) {
            write!(out, "{}", g + 1).unwrap();
            write_sparse_row(&mut out, x);
            out.push('\n');
        }
        out
    }
}

fn write_sparse_row(out: &mut String, x: ArrayView1<f64>) {
    for (k, &v) in x.iter().enumerate() {
        if v != 0.0 {
            write!(out, " {}:{}", k + 1, v).unwrap();
        }
    }
}

/// Train/validation/test fractions and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// 80/10/10.
    pub fn standard(seed: u64) -> Self {
        Self {
            train_frac: 0.8,
            val_frac: 0.1,
            test_frac: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(CrispError::InvalidConfig(
                "split fractions must lie in (0, 1)".into(),
            ));
        }
        if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CrispError::InvalidConfig(
                "split fractions must sum to 1".into(),
            ));
        }
        Ok(())
    }
}

/// Row indices of the three parts of a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle-then-slice partition of `0..n`. Validation and test take
/// `round(n * frac)` rows each; the remainder goes to training.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let n_val = (n as f64 * spec.val_frac).round() as usize;
    let n_test = (n as f64 * spec.test_frac).round() as usize;
    if n < 3 || n_val == 0 || n_test == 0 || n_val + n_test >= n {
        return Err(CrispError::EmptySplit(format!(
            "{n} instances cannot fill a {}/{}/{} split",
            spec.train_frac, spec.val_frac, spec.test_frac
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = idx.split_off(n - n_test);
    let val = idx.split_off(n - n_test - n_val);
    Ok(SplitIndices {
        train: idx,
        val,
        test,
    })
}

pub fn split(
    dataset: &MultiLabelDataset,
    spec: &SplitSpec,
) -> Result<(MultiLabelDataset, MultiLabelDataset, MultiLabelDataset)> {
    let parts = split_indices(dataset.n(), spec)?;
    Ok((
        dataset.select(&parts.train)?,
        dataset.select(&parts.val)?,
        dataset.select(&parts.test)?,
    ))
}

/// Result of hiding all but one positive label per instance.
#[derive(Debug, Clone)]
pub struct MaskOutcome {
    pub dataset: SinglePositiveDataset,
    /// Instances without any relevant label; they cannot be masked.
    pub dropped: usize,
    /// Source row of every output row.
    pub kept_rows: Vec<usize>,
}

/// Keeps one uniformly chosen positive label per instance.
pub fn mask_single_positive(dataset: &MultiLabelDataset, seed: u64) -> Result<MaskOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = Vec::with_capacity(dataset.n());
    let mut kept_rows = Vec::with_capacity(dataset.n());
    for (i, row) in dataset.labels.outer_iter().enumerate() {
        let positives: Vec<usize> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(j, _)| j)
            .collect();
        if let Some(&g) = positives.choose(&mut rng) {
            observed.push(g);
            kept_rows.push(i);
        }
    }
    if kept_rows.is_empty() {
        return Err(CrispError::NoPositiveLabels);
    }
    let features = dataset.features.select(Axis(0), &kept_rows);
    Ok(MaskOutcome {
        dropped: dataset.n() - kept_rows.len(),
        dataset: SinglePositiveDataset::new(features, observed, dataset.c())?,
        kept_rows,
    })
}

/// `{i : gamma_i = j}` in ascending order. Empty when `j` is never observed
/// or out of range.
pub fn positive_set(sp: &SinglePositiveDataset, j: usize) -> Vec<usize> {
    sp.observed
        .iter()
        .enumerate()
        .filter(|(_, &g)| g == j)
        .map(|(i, _)| i)
        .collect()
}

fn parse_err(line: usize, message: impl Into<String>) -> CrispError {
    CrispError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_features(
    tokens: std::str::SplitWhitespace<'_>,
    q: usize,
    line: usize,
    row: &mut [f64],
) -> Result<()> {
    let mut seen = BTreeSet::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| parse_err(line, format!("malformed feature token '{tok}'")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| parse_err(line, format!("malformed feature index '{idx}'")))?;
        let val: f64 = val
            .parse()
            .map_err(|_| parse_err(line, format!("malformed feature value '{val}'")))?;
        if idx == 0 || idx > q {
            return Err(parse_err(line, format!("feature index {idx} out of range")));
        }
        if !val.is_finite() {
            return Err(parse_err(line, format!("non-finite feature value '{tok}'")));
        }
        if !seen.insert(idx) {
            return Err(parse_err(line, format!("duplicate feature index {idx}")));
        }
        row[idx - 1] = val;
    }
    Ok(())
}

/// Reads the sparse multi-label format with `c` classes and `q` features.
pub fn parse_dataset<R: BufRead>(reader: R, c: usize, q: usize) -> Result<MultiLabelDataset> {
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let mut tokens = line.split_whitespace();
        let Some(head) = tokens.next() else { continue };
        if head.contains(':') {
            return Err(parse_err(line_no, "missing label list"));
        }
        let mut y = vec![0u8; c];
        if head != "," {
            for part in head.split(',') {
                let j: usize = part
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("malformed label '{part}'")))?;
                if j == 0 || j > c {
                    return Err(parse_err(line_no, format!("label index {j} out of range")));
                }
                y[j - 1] = 1;
            }
        }
        let mut x = vec![0.0; q];
        parse_features(tokens, q, line_no, &mut x)?;
        feats.extend(x);
        labels.extend(y);
        rows += 1;
    }
    if rows == 0 {
        return Err(CrispError::EmptyInput("no instances in input"));
    }
    MultiLabelDataset::new(
        Array2::from_shape_vec((rows, q), feats).expect("row-major buffer"),
        Array2::from_shape_vec((rows, c), labels).expect("row-major buffer"),
    )
}

/// Reads the single-positive format (`<gamma> <idx>:<val> ...`).
pub fn parse_single_positive<R: BufRead>(
    reader: R,
    c: usize,
    q: usize,
) -> Result<SinglePositiveDataset> {
    let mut feats = Vec::new();
    let mut observed = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let mut tokens = line.split_whitespace();
        let Some(head) = tokens.next() else { continue };
        let g: usize = head
            .parse()
            .map_err(|_| parse_err(line_no, format!("malformed observed label '{head}'")))?;
        if g == 0 || g > c {
            return Err(parse_err(line_no, format!("label index {g} out of range")));
        }
        let mut x = vec![0.0; q];
        parse_features(tokens, q, line_no, &mut x)?;
        feats.extend(x);
        observed.push(g - 1);
    }
    if observed.is_empty() {
        return Err(CrispError::EmptyInput("no instances in input"));
    }
    let n = observed.len();
    SinglePositiveDataset::new(
        Array2::from_shape_vec((n, q), feats).expect("row-major buffer"),
        observed,
        c,
    )
}

/// Largest label index and feature index (both 1-based) appearing in a
/// file of either format. Used when the caller does not state `c` and `q`.
pub fn scan_dimensions<R: BufRead>(reader: R) -> Result<(usize, usize)> {
    let (mut c, mut q) = (0, 0);
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let mut tokens = line.split_whitespace();
        let Some(head) = tokens.next() else { continue };
        for part in head.split(',').filter(|p| !p.is_empty()) {
            let j: usize = part
                .parse()
                .map_err(|_| parse_err(k + 1, format!("malformed label '{part}'")))?;
            c = c.max(j);
        }
        for tok in tokens {
            let idx = tok
                .split_once(':')
                .and_then(|(i, _)| i.parse::<usize>().ok())
                .ok_or_else(|| parse_err(k + 1, format!("malformed feature token '{tok}'")))?;
            q = q.max(idx);
        }
    }
    Ok((c, q))
}
