//! Class-prior estimation from single-positive data.
//!
//! For a label `j` and classifier scores `f(x_i)` define the empirical tail
//! fractions
//!
//! * `q_hat(z)`: share of *all* `n` instances scoring at least `z`;
//! * `q_hat_p(z)`: share of the `n_p` *observed positives* scoring at least `z`.
//!
//! If the positives above a threshold are a faithful sample of all positives
//! and few negatives score that high, `q_hat(z) / q_hat_p(z)` approaches the
//! class prior. The threshold is picked by minimising an upper confidence
//! bound on that ratio,
//!
//! ```text
//! q_hat(z) / q_hat_p(z)
//!     + (1 + tau) / q_hat_p(z) * ( sqrt(ln(4/delta) / 2n) + sqrt(ln(4/delta) / 2n_p) )
//! ```
//!
//! over every distinct score that at least one observed positive reaches.
//! The second term grows as the threshold leaves fewer positives above it,
//! so the search trades purity of the top bin against its size.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::SinglePositiveDataset;
use crate::error::{CrispError, Result};

/// Confidence level `delta` and slack `tau` of the threshold objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub delta: f64,
    pub tau: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            delta: 0.01,
            tau: 0.01,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CrispError::InvalidConfig(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(CrispError::InvalidConfig(format!(
                "tau must lie in (0, 1), got {}",
                self.tau
            )));
        }
        Ok(())
    }

    /// `sqrt(ln(4/delta) / 2n) + sqrt(ln(4/delta) / 2n_p)`.
    pub fn deviation(&self, n: usize, n_p: usize) -> f64 {
        let log_term = (4.0 / self.delta).ln();
        (log_term / (2.0 * n as f64)).sqrt() + (log_term / (2.0 * n_p as f64)).sqrt()
    }
}

/// Share of `scores` that are `>= z`.
pub fn q_hat(scores: &[f64], z: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(CrispError::EmptyInput("scores"));
    }
    let above = scores.iter().filter(|&&s| s >= z).count();
    Ok(above as f64 / scores.len() as f64)
}

/// Share of the labeled positives whose score is `>= z`.
pub fn q_hat_p(scores: &[f64], labeled_idx: &[usize], z: f64) -> Result<f64> {
    if labeled_idx.is_empty() {
        return Err(CrispError::NoObservedPositives { label: 0 });
    }
    let mut above = 0;
    for &i in labeled_idx {
        let s = *scores.get(i).ok_or_else(|| {
            CrispError::InvalidConfig(format!("labeled index {i} out of range"))
        })?;
        if s >= z {
            above += 1;
        }
    }
    Ok(above as f64 / labeled_idx.len() as f64)
}

/// The threshold objective at a single `z`. Fails when no labeled positive
/// reaches `z`.
pub fn ucb_objective(
    scores: &[f64],
    labeled_idx: &[usize],
    z: f64,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    cfg.validate()?;
    let q = q_hat(scores, z)?;
    let qp = q_hat_p(scores, labeled_idx, z)?;
    if qp == 0.0 {
        return Err(CrispError::InvalidConfig(format!(
            "no labeled positive scores at or above threshold {z}"
        )));
    }
    Ok(objective(q, qp, cfg.deviation(scores.len(), labeled_idx.len()), cfg.tau))
}

#[inline]
fn objective(q: f64, qp: f64, deviation: f64, tau: f64) -> f64 {
    q / qp + (1.0 + tau) / qp * deviation
}

/// Outcome of the threshold search for one label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelPrior {
    /// Clamped to `[1/n, 1]`.
    pub pi_hat: f64,
    /// `q_hat / q_hat_p` at the chosen threshold, before clamping.
    pub raw_ratio: f64,
    pub z_hat: f64,
    pub objective: f64,
    pub n: usize,
    pub n_p: usize,
}

/// Exhaustive threshold search over the distinct values of `scores`.
///
/// Ties in the objective go to the smallest threshold. Runs in
/// `O(n log n)`: both score lists are sorted once and swept together from
/// the top.
pub fn estimate_prior(
    scores: &[f64],
    labeled_idx: &[usize],
    cfg: &EstimatorConfig,
) -> Result<LabelPrior> {
    cfg.validate()?;
    if scores.is_empty() {
        return Err(CrispError::EmptyInput("scores"));
    }
    if labeled_idx.is_empty() {
        return Err(CrispError::NoObservedPositives { label: 0 });
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(CrispError::InvalidConfig(format!("score {s} outside [0, 1]")));
    }
    let mut labeled = Vec::with_capacity(labeled_idx.len());
    for &i in labeled_idx {
        labeled.push(*scores.get(i).ok_or_else(|| {
            CrispError::InvalidConfig(format!("labeled index {i} out of range"))
        })?);
    }
    let mut all = scores.to_vec();
    all.sort_unstable_by(|a, b| b.total_cmp(a));
    labeled.sort_unstable_by(|a, b| b.total_cmp(a));

    let (n, n_p) = (all.len(), labeled.len());
    let deviation = cfg.deviation(n, n_p);
    let mut best: Option<(f64, f64, f64)> = None; // (objective, z, ratio)
    let (mut above, mut above_p) = (0, 0);
    while above < n {
        let z = all[above];
        while above < n && all[above] == z {
            above += 1;
        }
        while above_p < n_p && labeled[above_p] >= z {
            above_p += 1;
        }
        if above_p == 0 {
            continue;
        }
        let q = above as f64 / n as f64;
        let qp = above_p as f64 / n_p as f64;
        let value = objective(q, qp, deviation, cfg.tau);
        // Descending sweep: `<=` lets a later (smaller) z win ties.
        if best.is_none_or(|(b, _, _)| value <= b) {
            best = Some((value, z, q / qp));
        }
    }
    let (objective, z_hat, raw_ratio) =
        best.expect("the largest labeled score is always a candidate");
    Ok(LabelPrior {
        pi_hat: raw_ratio.clamp(1.0 / n as f64, 1.0),
        raw_ratio,
        z_hat,
        objective,
        n,
        n_p,
    })
}

/// Per-label estimates for a whole score matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorEstimate {
    pub pi_hat: Vec<f64>,
    /// `None` for labels whose prior was carried over from a previous
    /// estimate because nothing was observed for them.
    pub z_hat: Vec<Option<f64>>,
    pub objective: Vec<Option<f64>>,
    pub n: usize,
    pub n_p: Vec<usize>,
}

/// Runs [`estimate_prior`] on every column of `probs`, using the instances
/// observed with label `j` as its labeled positives. Labels never observed
/// take their value from `fallback` when given.
pub fn estimate_all_priors(
    probs: ArrayView2<f64>,
    sp: &SinglePositiveDataset,
    cfg: &EstimatorConfig,
    fallback: Option<&[f64]>,
) -> Result<PriorEstimate> {
    if probs.dim() != (sp.n(), sp.c()) {
        return Err(CrispError::shape(
            format!("{}x{} scores", sp.n(), sp.c()),
            format!("{}x{}", probs.nrows(), probs.ncols()),
        ));
    }
    if let Some(f) = fallback {
        if f.len() != sp.c() {
            return Err(CrispError::shape(format!("{} fallback priors", sp.c()), f.len()));
        }
    }
    let mut positives = vec![Vec::new(); sp.c()];
    for (i, &g) in sp.observed().iter().enumerate() {
        positives[g].push(i);
    }
    let mut est = PriorEstimate {
        pi_hat: Vec::with_capacity(sp.c()),
        z_hat: Vec::with_capacity(sp.c()),
        objective: Vec::with_capacity(sp.c()),
        n: sp.n(),
        n_p: positives.iter().map(Vec::len).collect(),
    };
    for (j, labeled) in positives.iter().enumerate() {
        if labeled.is_empty() {
            let prev = fallback.ok_or(CrispError::NoObservedPositives { label: j })?;
            est.pi_hat.push(prev[j]);
            est.z_hat.push(None);
            est.objective.push(None);
            continue;
        }
        let column = probs.column(j).to_vec();
        let lp = estimate_prior(&column, labeled, cfg)?;
        est.pi_hat.push(lp.pi_hat);
        est.z_hat.push(Some(lp.z_hat));
        est.objective.push(Some(lp.objective));
    }
    Ok(est)
}
