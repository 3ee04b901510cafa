//! Synthetic fixtures with exactly known class priors.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::MultiLabelDataset;
use crate::error::{CrispError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub q: usize,
    pub c: usize,
    pub target_priors: Vec<f64>,
    /// Distance each instance is pushed away from every label's boundary.
    pub separability: f64,
    /// Weight of a direction shared by all labels, in `[0, 1)`.
    pub label_correlation: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 || self.c == 0 {
            return Err(CrispError::InvalidConfig("q and c must be >= 1".into()));
        }
        if self.target_priors.len() != self.c {
            return Err(CrispError::InvalidConfig(format!(
                "prior count mismatch: {} priors for {} classes",
                self.target_priors.len(),
                self.c
            )));
        }
        if self.n < 10 * self.c {
            return Err(CrispError::InvalidConfig(format!(
                "n = {} is below 10 * c = {}",
                self.n,
                10 * self.c
            )));
        }
        if let Some(p) = self.target_priors.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(CrispError::InvalidConfig(format!("prior {p} outside (0, 1)")));
        }
        if !(self.separability.is_finite() && self.separability >= 0.0) {
            return Err(CrispError::InvalidConfig("separability must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.label_correlation) {
            return Err(CrispError::InvalidConfig(
                "label_correlation must lie in [0, 1)".into(),
            ));
        }
        for (j, &p) in self.target_priors.iter().enumerate() {
            let k = (self.n as f64 * p).round() as usize;
            if k == 0 || k == self.n {
                return Err(CrispError::Infeasible(format!(
                    "prior {p} of label {} gives {k} positives out of {}",
                    j + 1,
                    self.n
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: MultiLabelDataset,
    /// Exactly `round(n * pi_j) / n`.
    pub realized_priors: Vec<f64>,
    /// Unit label directions, one row per label.
    pub directions: Array2<f64>,
}

fn gaussian_vec(len: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || StandardNormal.sample(rng))
}

fn unit(v: Array1<f64>) -> Array1<f64> {
    let norm = v.dot(&v).sqrt();
    v / norm
}

/// Gaussian features with quantile-thresholded linear labels.
///
/// Label `j` marks the `round(n * pi_j)` instances with the largest
/// projection on a random unit direction `w_j`. Each direction mixes a
/// private random vector with a shared one according to
/// `label_correlation`. After labelling, every instance moves by
/// `separability` along `+w_j` for each relevant label and along `-w_j` for
/// each irrelevant one, which widens the margin without changing labels.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, q, c) = (cfg.n, cfg.q, cfg.c);

    let mut features = Array2::from_shape_simple_fn((n, q), || StandardNormal.sample(&mut rng));
    let shared = unit(gaussian_vec(q, &mut rng));
    let mut directions = Array2::zeros((c, q));
    for mut row in directions.outer_iter_mut() {
        let own = unit(gaussian_vec(q, &mut rng));
        let rho = cfg.label_correlation;
        let mixed = own * (1.0 - rho).sqrt() + &shared * rho.sqrt();
        row.assign(&unit(mixed));
    }

    let projections = features.dot(&directions.t());
    let mut labels = Array2::<u8>::zeros((n, c));
    let mut realized = Vec::with_capacity(c);
    for (j, &p) in cfg.target_priors.iter().enumerate() {
        let k = (n as f64 * p).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        let col = projections.column(j);
        order.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
        for &i in &order[..k] {
            labels[[i, j]] = 1;
        }
        realized.push(k as f64 / n as f64);
    }

    if cfg.separability > 0.0 {
        let signs = labels.mapv(|y| if y == 1 { cfg.separability } else { -cfg.separability });
        features += &signs.dot(&directions);
    }

    Ok(SynthOutput {
        dataset: MultiLabelDataset::new(features, labels)?,
        realized_priors: realized,
        directions,
    })
}

/// Scores for a single label with known prior, bypassing any model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFixture {
    pub scores: Vec<f64>,
    /// Ascending indices of the observed positives.
    pub labeled_idx: Vec<usize>,
    /// Indices of all positives, observed or not.
    pub positive_idx: Vec<usize>,
    pub true_pi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreFixtureConfig {
    pub n: usize,
    pub pi: f64,
    pub pos_low: f64,
    pub pos_high: f64,
    pub neg_low: f64,
    pub neg_high: f64,
    pub labeled_frac: f64,
    pub seed: u64,
}

impl ScoreFixtureConfig {
    /// Positives on `[0.6, 1]`, negatives on `[0, 0.4]`.
    pub fn separable(n: usize, pi: f64, labeled_frac: f64, seed: u64) -> Self {
        Self {
            n,
            pi,
            pos_low: 0.6,
            pos_high: 1.0,
            neg_low: 0.0,
            neg_high: 0.4,
            labeled_frac,
            seed,
        }
    }
}

/// `round(n * pi)` positives scored uniformly on `[pos_low, pos_high]`, the
/// rest on `[neg_low, neg_high]`, with `round(labeled_frac * positives)` of
/// the positives marked observed.
pub fn score_fixture(cfg: &ScoreFixtureConfig) -> Result<ScoreFixture> {
    let ranges = [cfg.pos_low, cfg.pos_high, cfg.neg_low, cfg.neg_high];
    if ranges.iter().any(|v| !(0.0..=1.0).contains(v))
        || cfg.pos_low > cfg.pos_high
        || cfg.neg_low > cfg.neg_high
    {
        return Err(CrispError::InvalidConfig("score ranges must be ordered subsets of [0, 1]".into()));
    }
    if !(0.0..=1.0).contains(&cfg.pi) || !(0.0..=1.0).contains(&cfg.labeled_frac) {
        return Err(CrispError::InvalidConfig("pi and labeled_frac must lie in [0, 1]".into()));
    }
    let n_pos = (cfg.n as f64 * cfg.pi).round() as usize;
    let n_lab = (n_pos as f64 * cfg.labeled_frac).round() as usize;
    if n_lab == 0 {
        return Err(CrispError::EmptyInput("labeled set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..cfg.n).collect();
    order.shuffle(&mut rng);
    let pos = Uniform::new_inclusive(cfg.pos_low, cfg.pos_high).expect("ordered range");
    let neg = Uniform::new_inclusive(cfg.neg_low, cfg.neg_high).expect("ordered range");
    let mut scores = vec![0.0; cfg.n];
    for (rank, &i) in order.iter().enumerate() {
        scores[i] = if rank < n_pos {
            pos.sample(&mut rng)
        } else {
            neg.sample(&mut rng)
        };
    }
    let mut positive_idx = order[..n_pos].to_vec();
    let mut labeled_idx = order[..n_lab].to_vec();
    positive_idx.sort_unstable();
    labeled_idx.sort_unstable();
    Ok(ScoreFixture {
        scores,
        labeled_idx,
        positive_idx,
        true_pi: n_pos as f64 / cfg.n as f64,
    })
}

/// Label frequencies of `labels` restricted to `rows`.
pub fn priors_of_rows(labels: &Array2<u8>, rows: &[usize]) -> Vec<f64> {
    let sub = labels.select(Axis(0), rows);
    sub.axis_iter(Axis(1))
        .map(|col| col.iter().map(|&v| v as f64).sum::<f64>() / rows.len() as f64)
        .collect()
}
