//! Loss functions and their logit gradients.
//!
//! With the absolute loss `|y - f|`, the fully supervised multi-label risk of
//! a scorer `f` splits per label into a term over positives and a term over
//! all data:
//!
//! ```text
//! R(f) = sum_j 2 pi_j E[1 - f_j | y_j = 1] + (E[f_j] - pi_j)
//! ```
//!
//! Only the first expectation needs labels, and single-positive data gives an
//! unbiased sample of positives for each label. Replacing the second term by
//! its absolute value keeps the estimate non-negative and pulls the model's
//! mean output toward the prior. [`crisp_empirical_risk`] is that estimator;
//! [`crisp_biased_risk`] additionally shifts the positive-term logits by
//! `-lambda (1 - pi_j)` so rare labels push their positives further up.
//! [`full_supervised_risk`] and [`decomposed_risk`] are the two sides of the
//! identity above and exist to check it.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{CrispError, Result};
use crate::model::{sigmoid, sigmoid_grad};

/// Floor and ceiling applied to probabilities inside logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

/// Priors and logit-shift strength for the single-positive risks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub lambda: f64,
    pub priors: Vec<f64>,
}

impl RiskConfig {
    pub fn new(priors: Vec<f64>, lambda: f64) -> Result<Self> {
        let cfg = Self { lambda, priors };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(CrispError::InvalidConfig(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if let Some(p) = self.priors.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(CrispError::InvalidConfig(format!(
                "priors must lie in (0, 1], got {p}"
            )));
        }
        Ok(())
    }

    /// `lambda * (1 - pi_j)`.
    pub fn shift(&self, j: usize) -> f64 {
        self.lambda * (1.0 - self.priors[j])
    }
}

/// A single-positive risk split into its per-label summands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub per_label_positive_term: Vec<f64>,
    pub per_label_alignment_term: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Binary cross-entropy with every unobserved label taken as negative.
    AssumeNegative,
    /// Unbiased estimator with absolute alignment term.
    Crisp,
    /// [`LossKind::Crisp`] with the `lambda (1 - pi_j)` logit shift on positives.
    CrispBiased,
}

/// Groups instance indices by observed label: `sets[j] = {i : gamma_i = j}`.
pub fn positive_sets(observed: &[usize], c: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); c];
    for (i, &g) in observed.iter().enumerate() {
        sets[g].push(i);
    }
    sets
}

fn check_same_shape<A, B>(a: ArrayView2<A>, b: ArrayView2<B>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(CrispError::shape(
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    if a.is_empty() {
        return Err(CrispError::EmptyInput("score matrix"));
    }
    Ok(())
}

fn check_sets(n: usize, c: usize, sets: &[Vec<usize>], cfg: Option<&RiskConfig>) -> Result<()> {
    if n == 0 {
        return Err(CrispError::EmptyInput("batch"));
    }
    if sets.len() != c {
        return Err(CrispError::shape(format!("{c} positive sets"), sets.len()));
    }
    if let Some(&i) = sets.iter().flatten().find(|&&i| i >= n) {
        return Err(CrispError::InvalidConfig(format!(
            "positive index {i} outside batch of {n}"
        )));
    }
    if let Some(cfg) = cfg {
        cfg.validate()?;
        if cfg.priors.len() != c {
            return Err(CrispError::shape(format!("{c} priors"), cfg.priors.len()));
        }
    }
    Ok(())
}

/// Mean over instances of `sum_j |y_ij - f_ij|`.
pub fn full_supervised_risk(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> Result<f64> {
    check_same_shape(probs, labels)?;
    let total: f64 = probs
        .iter()
        .zip(labels.iter())
        .map(|(&f, &y)| if y == 1 { 1.0 - f } else { f })
        .sum();
    Ok(total / probs.nrows() as f64)
}

/// `sum_j 2 pi_j mean_{y_j=1}(1 - f_j) + mean(f_j) - pi_j` with empirical
/// priors and conditional means. Every label needs at least one positive.
pub fn decomposed_risk(probs: ArrayView2<f64>, labels: ArrayView2<u8>) -> Result<f64> {
    check_same_shape(probs, labels)?;
    let n = probs.nrows() as f64;
    let mut risk = 0.0;
    for (j, (f, y)) in probs
        .axis_iter(Axis(1))
        .zip(labels.axis_iter(Axis(1)))
        .enumerate()
    {
        let (mut pos_count, mut pos_loss) = (0usize, 0.0);
        for (&fi, &yi) in f.iter().zip(y.iter()) {
            if yi == 1 {
                pos_count += 1;
                pos_loss += 1.0 - fi;
            }
        }
        if pos_count == 0 {
            return Err(CrispError::NoObservedPositives { label: j });
        }
        let prior = pos_count as f64 / n;
        risk += 2.0 * prior * pos_loss / pos_count as f64 + f.sum() / n - prior;
    }
    Ok(risk)
}

fn single_positive_risk(
    probs: ArrayView2<f64>,
    positive_probs: impl Fn(usize, usize) -> f64,
    sets: &[Vec<usize>],
    priors: &[f64],
) -> LossValue {
    let n = probs.nrows() as f64;
    let mut pos_terms = Vec::with_capacity(sets.len());
    let mut align_terms = Vec::with_capacity(sets.len());
    for (j, set) in sets.iter().enumerate() {
        let pos = if set.is_empty() {
            0.0
        } else {
            let miss: f64 = set.iter().map(|&i| 1.0 - positive_probs(i, j)).sum();
            2.0 * priors[j] * miss / set.len() as f64
        };
        let mean = probs.column(j).sum() / n;
        pos_terms.push(pos);
        align_terms.push((mean - priors[j]).abs());
    }
    LossValue {
        total: pos_terms.iter().sum::<f64>() + align_terms.iter().sum::<f64>(),
        per_label_positive_term: pos_terms,
        per_label_alignment_term: align_terms,
    }
}

/// The unbiased single-positive risk over a batch. `positive_sets[j]` holds
/// the batch rows observed with label `j`; empty sets contribute only the
/// alignment term. `cfg.lambda` is ignored.
pub fn crisp_empirical_risk(
    probs: ArrayView2<f64>,
    positive_sets: &[Vec<usize>],
    cfg: &RiskConfig,
) -> Result<LossValue> {
    check_sets(probs.nrows(), probs.ncols(), positive_sets, Some(cfg))?;
    Ok(single_positive_risk(
        probs,
        |i, j| probs[[i, j]],
        positive_sets,
        &cfg.priors,
    ))
}

/// [`crisp_empirical_risk`] with positive-term probabilities
/// `sigmoid(g_ij - lambda (1 - pi_j))`. The alignment term uses the
/// unshifted `sigmoid(g_ij)`.
pub fn crisp_biased_risk(
    logits: ArrayView2<f64>,
    positive_sets: &[Vec<usize>],
    cfg: &RiskConfig,
) -> Result<LossValue> {
    check_sets(logits.nrows(), logits.ncols(), positive_sets, Some(cfg))?;
    let probs = logits.mapv(sigmoid);
    Ok(single_positive_risk(
        probs.view(),
        |i, j| sigmoid(logits[[i, j]] - cfg.shift(j)),
        positive_sets,
        &cfg.priors,
    ))
}

/// Mean over instances of the binary cross-entropy against the one-hot
/// observed labels, with probabilities clamped to `[1e-12, 1 - 1e-12]`.
pub fn an_warmup_loss(probs: ArrayView2<f64>, one_hot: ArrayView2<u8>) -> Result<f64> {
    check_same_shape(probs, one_hot)?;
    let total: f64 = probs
        .iter()
        .zip(one_hot.iter())
        .map(|(&f, &l)| {
            let p = f.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
            if l == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / probs.nrows() as f64)
}

fn one_hot_from_sets(n: usize, sets: &[Vec<usize>]) -> Array2<u8> {
    let mut l = Array2::zeros((n, sets.len()));
    for (j, set) in sets.iter().enumerate() {
        for &i in set {
            l[[i, j]] = 1;
        }
    }
    l
}

/// Scalar value of the chosen loss at `logits`.
pub fn loss_value(
    logits: ArrayView2<f64>,
    positive_sets: &[Vec<usize>],
    cfg: &RiskConfig,
    kind: LossKind,
) -> Result<f64> {
    match kind {
        LossKind::AssumeNegative => {
            check_sets(logits.nrows(), logits.ncols(), positive_sets, None)?;
            let l = one_hot_from_sets(logits.nrows(), positive_sets);
            an_warmup_loss(logits.mapv(sigmoid).view(), l.view())
        }
        LossKind::Crisp => {
            crisp_empirical_risk(logits.mapv(sigmoid).view(), positive_sets, cfg).map(|v| v.total)
        }
        LossKind::CrispBiased => crisp_biased_risk(logits, positive_sets, cfg).map(|v| v.total),
    }
}

/// `dL/dg` of the chosen loss. The absolute value uses subgradient 0 at the
/// kink; the cross-entropy gradient is zero where its clamp is active.
pub fn risk_gradients(
    logits: ArrayView2<f64>,
    positive_sets: &[Vec<usize>],
    cfg: &RiskConfig,
    kind: LossKind,
) -> Result<Array2<f64>> {
    let (n, c) = logits.dim();
    let nf = n as f64;
    match kind {
        LossKind::AssumeNegative => {
            check_sets(n, c, positive_sets, None)?;
            let l = one_hot_from_sets(n, positive_sets);
            let mut grad = Array2::zeros((n, c));
            ndarray::Zip::from(&mut grad)
                .and(&logits)
                .and(&l)
                .for_each(|d, &g, &y| {
                    let p = sigmoid(g);
                    if (LOG_CLAMP..=1.0 - LOG_CLAMP).contains(&p) {
                        *d = (p - y as f64) / nf;
                    }
                });
            Ok(grad)
        }
        LossKind::Crisp | LossKind::CrispBiased => {
            check_sets(n, c, positive_sets, Some(cfg))?;
            let mut grad = Array2::zeros((n, c));
            for j in 0..c {
                let col = logits.column(j);
                let mean = col.iter().map(|&g| sigmoid(g)).sum::<f64>() / nf;
                let dev = mean - cfg.priors[j];
                let sign = if dev > 0.0 {
                    1.0
                } else if dev < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                if sign != 0.0 {
                    for (i, &g) in col.iter().enumerate() {
                        grad[[i, j]] = sign * sigmoid_grad(g) / nf;
                    }
                }
                let set = &positive_sets[j];
                if set.is_empty() {
                    continue;
                }
                let shift = if kind == LossKind::CrispBiased {
                    cfg.shift(j)
                } else {
                    0.0
                };
                let weight = 2.0 * cfg.priors[j] / set.len() as f64;
                for &i in set {
                    grad[[i, j]] -= weight * sigmoid_grad(col[i] - shift);
                }
            }
            Ok(grad)
        }
    }
}
