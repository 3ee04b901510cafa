//! Multi-label evaluation measures.
//!
//! Tie conventions are fixed because they move results in the third decimal:
//!
//! * ranks are competition ranks that give tied scores the *worst* shared
//!   rank, i.e. `rank(j) = |{k : s_k >= s_j}|`;
//! * a tied (relevant, irrelevant) pair counts as half a mis-ordering in the
//!   ranking loss;
//! * one-error takes the lowest-index label among tied top scores.
//!
//! Instances (or, for mAP, labels) on which a measure is undefined are left
//! out of its average; [`MetricsReport`] records how many.

use ndarray::{ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{CrispError, Result};

fn check(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> Result<()> {
    if probs.dim() != labels.dim() {
        return Err(CrispError::shape(
            format!("{}x{} labels", probs.nrows(), probs.ncols()),
            format!("{}x{}", labels.nrows(), labels.ncols()),
        ));
    }
    if probs.is_empty() {
        return Err(CrispError::EmptyInput("score matrix"));
    }
    Ok(())
}

/// Average of `Some` values and the number of `None`s.
fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let (mut sum, mut count, mut skipped) = (0.0, 0usize, 0usize);
    for v in values {
        match v {
            Some(v) => {
                sum += v;
                count += 1;
            }
            None => skipped += 1,
        }
    }
    ((count > 0).then(|| sum / count as f64), skipped)
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_unstable_by(|a, b| b.total_cmp(a));
    v
}

/// Number of entries `>= s` in a descending slice.
fn count_at_least(desc: &[f64], s: f64) -> usize {
    desc.partition_point(|&x| x >= s)
}

/// Mean over relevant items of `|{relevant k : s_k >= s_j}| / |{k : s_k >= s_j}|`.
fn precision_at_relevant(scores: ArrayView1<f64>, relevant: ArrayView1<u8>) -> Option<f64> {
    let rel_scores: Vec<f64> = scores
        .iter()
        .zip(relevant.iter())
        .filter(|(_, &y)| y == 1)
        .map(|(&s, _)| s)
        .collect();
    if rel_scores.is_empty() {
        return None;
    }
    let all = sorted_desc(scores.to_vec());
    let rel = sorted_desc(rel_scores.clone());
    // Summed in index order.
    let total: f64 = rel_scores
        .iter()
        .map(|&s| count_at_least(&rel, s) as f64 / count_at_least(&all, s) as f64)
        .sum();
    Some(total / rel.len() as f64)
}

/// Fraction of entries where `1(f >= threshold)` disagrees with the label.
pub fn hamming_loss(probs: ArrayView2<f64>, labels: ArrayView2<u8>, threshold: f64) -> Result<f64> {
    check(probs, labels)?;
    let wrong = probs
        .iter()
        .zip(labels.iter())
        .filter(|(&f, &y)| (f >= threshold) != (y == 1))
        .count();
    Ok(wrong as f64 / probs.len() as f64)
}

fn ranking_loss_row(scores: ArrayView1<f64>, labels: ArrayView1<u8>) -> Option<f64> {
    let mut irrelevant: Vec<f64> = Vec::new();
    let mut relevant: Vec<f64> = Vec::new();
    for (&s, &y) in scores.iter().zip(labels.iter()) {
        if y == 1 {
            relevant.push(s);
        } else {
            irrelevant.push(s);
        }
    }
    if relevant.is_empty() || irrelevant.is_empty() {
        return None;
    }
    irrelevant.sort_unstable_by(f64::total_cmp);
    let m = irrelevant.len();
    let bad: f64 = relevant
        .iter()
        .map(|&r| {
            let below = irrelevant.partition_point(|&x| x < r);
            let not_above = irrelevant.partition_point(|&x| x <= r);
            (m - not_above) as f64 + 0.5 * (not_above - below) as f64
        })
        .sum();
    Some(bad / (relevant.len() * m) as f64)
}

fn ranking_loss_parts(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> (Option<f64>, usize) {
    mean_defined(
        probs
            .outer_iter()
            .zip(labels.outer_iter())
            .map(|(s, y)| ranking_loss_row(s, y)),
    )
}

/// Per instance, the fraction of (relevant, irrelevant) pairs ranked in the
/// wrong order, averaged over instances that have both kinds of label.
pub fn ranking_loss(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> Result<f64> {
    check(probs, labels)?;
    ranking_loss_parts(probs, labels)
        .0
        .ok_or(CrispError::UndefinedMetric("ranking loss needs an instance with relevant and irrelevant labels"))
}

fn one_error_parts(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> (Option<f64>, usize) {
    mean_defined(probs.outer_iter().zip(labels.outer_iter()).map(|(s, y)| {
        if !y.iter().any(|&v| v == 1) {
            return None;
        }
        let mut top = 0;
        for (j, &v) in s.iter().enumerate() {
            if v > s[top] {
                top = j;
            }
        }
        Some(if y[top] == 1 { 0.0 } else { 1.0 })
    }))
}

/// Fraction of instances whose top-scored label is irrelevant.
pub fn one_error(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> Result<f64> {
    check(probs, labels)?;
    one_error_parts(probs, labels)
        .0
        .ok_or(CrispError::UndefinedMetric("one-error needs an instance with a relevant label"))
}

fn coverage_parts(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> (Option<f64>, usize) {
    let c = probs.ncols() as f64;
    mean_defined(probs.outer_iter().zip(labels.outer_iter()).map(|(s, y)| {
        let lowest = s
            .iter()
            .zip(y.iter())
            .filter(|(_, &v)| v == 1)
            .map(|(&v, _)| v)
            .min_by(f64::total_cmp)?;
        let rank = s.iter().filter(|&&v| v >= lowest).count();
        Some((rank - 1) as f64 / c)
    }))
}

/// `(rank of the worst-ranked relevant label - 1) / c`, averaged.
pub fn coverage(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> Result<f64> {
    check(probs, labels)?;
    coverage_parts(probs, labels)
        .0
        .ok_or(CrispError::UndefinedMetric("coverage needs an instance with a relevant label"))
}

fn average_precision_parts(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> (Option<f64>, usize) {
    mean_defined(
        probs
            .outer_iter()
            .zip(labels.outer_iter())
            .map(|(s, y)| precision_at_relevant(s, y)),
    )
}

/// Example-based average precision over each instance's label ranking.
pub fn average_precision(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> Result<f64> {
    check(probs, labels)?;
    average_precision_parts(probs, labels)
        .0
        .ok_or(CrispError::UndefinedMetric("average precision needs an instance with a relevant label"))
}

fn map_parts(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> (Option<f64>, usize) {
    mean_defined(
        probs
            .axis_iter(Axis(1))
            .zip(labels.axis_iter(Axis(1)))
            .map(|(s, y)| precision_at_relevant(s, y)),
    )
}

/// Label-macro mean average precision over each label's instance ranking.
pub fn mean_average_precision(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> Result<f64> {
    check(probs, labels)?;
    map_parts(probs, labels)
        .0
        .ok_or(CrispError::UndefinedMetric("mAP needs a label with a positive instance"))
}

/// How many instances (labels, for mAP) each measure skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusions {
    pub ranking_loss: usize,
    pub one_error: usize,
    pub coverage: usize,
    pub average_precision: usize,
    pub mean_average_precision: usize,
}

/// All six measures. A measure is `None` when no instance (label) defines it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub c: usize,
    pub hamming_loss: f64,
    pub ranking_loss: Option<f64>,
    pub one_error: Option<f64>,
    pub coverage: Option<f64>,
    pub average_precision: Option<f64>,
    pub mean_average_precision: Option<f64>,
    pub excluded: Exclusions,
}

impl MetricsReport {
    pub fn compute(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> Result<Self> {
        check(probs, labels)?;
        let (ranking_loss, rl_x) = ranking_loss_parts(probs, labels);
        let (one_error, oe_x) = one_error_parts(probs, labels);
        let (coverage, cov_x) = coverage_parts(probs, labels);
        let (average_precision, ap_x) = average_precision_parts(probs, labels);
        let (mean_average_precision, map_x) = map_parts(probs, labels);
        Ok(Self {
            n: probs.nrows(),
            c: probs.ncols(),
            hamming_loss: hamming_loss(probs, labels, 0.5)?,
            ranking_loss,
            one_error,
            coverage,
            average_precision,
            mean_average_precision,
            excluded: Exclusions {
                ranking_loss: rl_x,
                one_error: oe_x,
                coverage: cov_x,
                average_precision: ap_x,
                mean_average_precision: map_x,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    #[test]
    fn hamming_examples() {
        let y = array![[1u8, 0], [0, 1]];
        let exact = y.mapv(|v| v as f64);
        assert_eq!(hamming_loss(exact.view(), y.view(), 0.5).unwrap(), 0.0);
        let ones = Array2::from_elem((2, 2), 1u8);
        let low = Array2::from_elem((2, 2), 0.4);
        assert_eq!(hamming_loss(low.view(), ones.view(), 0.5).unwrap(), 1.0);
        let p = array![[0.6, 0.4], [0.2, 0.8]];
        let y = array![[1u8, 1], [0, 0]];
        assert_eq!(hamming_loss(p.view(), y.view(), 0.5).unwrap(), 0.5);
    }

    #[test]
    fn ranking_loss_examples() {
        let y = array![[1u8, 0]];
        assert_eq!(ranking_loss(array![[0.9, 0.1]].view(), y.view()).unwrap(), 0.0);
        assert_eq!(ranking_loss(array![[0.1, 0.9]].view(), y.view()).unwrap(), 1.0);
        let tie = ranking_loss(array![[0.5, 0.5, 0.2]].view(), array![[1u8, 0, 0]].view());
        assert_eq!(tie.unwrap(), 0.25);
        assert!(ranking_loss(array![[0.5, 0.5]].view(), array![[1u8, 1]].view()).is_err());
    }

    #[test]
    fn one_error_examples() {
        let p = array![[0.9, 0.1, 0.3], [0.2, 0.8, 0.1], [0.4, 0.4, 0.9]];
        let y = array![[1u8, 0, 0], [0, 1, 1], [1, 1, 0]];
        assert_abs_diff_eq!(one_error(p.view(), y.view()).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        // Ties resolve to the first index; the empty row is skipped.
        let p = array![[0.5, 0.5], [0.1, 0.2]];
        let y = array![[1u8, 0], [0, 0]];
        let report = MetricsReport::compute(p.view(), y.view()).unwrap();
        assert_eq!(report.one_error, Some(0.0));
        assert_eq!(report.excluded.one_error, 1);
    }

    #[test]
    fn coverage_examples() {
        let y = array![[0u8, 1, 0, 0]];
        assert_eq!(coverage(array![[0.1, 0.9, 0.2, 0.3]].view(), y.view()).unwrap(), 0.0);
        assert_eq!(coverage(array![[0.4, 0.1, 0.2, 0.3]].view(), y.view()).unwrap(), 0.75);
        let p = array![[0.9, 0.8, 0.1, 0.05]];
        let y = array![[1u8, 0, 1, 0]];
        assert_eq!(coverage(p.view(), y.view()).unwrap(), 0.5);
    }

    #[test]
    fn average_precision_examples() {
        let p = array![[0.9, 0.8, 0.1]];
        assert_eq!(average_precision(p.view(), array![[1u8, 1, 0]].view()).unwrap(), 1.0);
        let ap = average_precision(p.view(), array![[1u8, 0, 1]].view()).unwrap();
        assert_abs_diff_eq!(ap, (1.0 + 2.0 / 3.0) / 2.0, epsilon = 1e-15);
        let all = average_precision(array![[0.1, 0.7, 0.3]].view(), array![[1u8, 1, 1]].view());
        assert_eq!(all.unwrap(), 1.0);
    }

    #[test]
    fn map_examples() {
        let p = array![[0.9, 0.1], [0.8, 0.7], [0.7, 0.2]];
        let y = array![[1u8, 0], [0, 1], [1, 0]];
        let report = MetricsReport::compute(p.view(), y.view()).unwrap();
        // label 0: (1/1 + 2/3) / 2; label 1: its positive ranks first.
        let expected = ((1.0 + 2.0 / 3.0) / 2.0 + 1.0) / 2.0;
        assert_abs_diff_eq!(report.mean_average_precision.unwrap(), expected, epsilon = 1e-15);

        let y = array![[1u8, 0], [0, 0], [1, 0]];
        let report = MetricsReport::compute(p.view(), y.view()).unwrap();
        assert_eq!(report.excluded.mean_average_precision, 1);
        let col0 = (1.0 + 2.0 / 3.0) / 2.0;
        assert_abs_diff_eq!(report.mean_average_precision.unwrap(), col0, epsilon = 1e-15);
    }

    #[test]
    fn perfect_scores() {
        let y = array![[1u8, 0, 1], [0, 1, 0], [1, 1, 0]];
        let p = y.mapv(|v| if v == 1 { 0.9 } else { 0.1 });
        let r = MetricsReport::compute(p.view(), y.view()).unwrap();
        assert_eq!(r.hamming_loss, 0.0);
        assert_eq!(r.ranking_loss, Some(0.0));
        assert_eq!(r.one_error, Some(0.0));
        assert_eq!(r.average_precision, Some(1.0));
        assert_eq!(r.mean_average_precision, Some(1.0));
    }

    #[test]
    fn shape_mismatch() {
        let p = Array2::zeros((2, 2));
        let y = Array2::<u8>::zeros((2, 3));
        assert!(MetricsReport::compute(p.view(), y.view()).is_err());
    }
}
