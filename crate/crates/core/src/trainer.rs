//! The alternating training loop.
//!
//! 1. Warm up with binary cross-entropy, treating unobserved labels as
//!    negative.
//! 2. For each epoch: score the whole training set, re-estimate every
//!    label's prior, then run one pass of shuffled mini-batches minimising
//!    the logit-shifted single-positive risk under those priors.
//!
//! Optimiser state carries over from warm-up into the main loop.

use std::path::PathBuf;
use std::time::Instant;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{MultiLabelDataset, SinglePositiveDataset};
use crate::error::{CrispError, Result};
use crate::metrics::MetricsReport;
use crate::model::Classifier;
use crate::optim::{Adam, AdamConfig};
use crate::prior::{estimate_all_priors, EstimatorConfig, PriorEstimate};
use crate::risk::{loss_value, positive_sets, risk_gradients, LossKind, RiskConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub delta: f64,
    pub tau: f64,
    pub lambda: f64,
    pub prior_refresh_every: usize,
    /// Use these priors for every epoch instead of estimating them.
    pub fixed_priors: Option<Vec<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            warmup_epochs: 2,
            batch_size: 16,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            seed: 0,
            delta: 0.01,
            tau: 0.01,
            lambda: 1.0,
            prior_refresh_every: 1,
            fixed_priors: None,
        }
    }
}

impl TrainConfig {
    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig {
            delta: self.delta,
            tau: self.tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(CrispError::InvalidConfig(msg.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay must be >= 0");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be >= 0");
        }
        if self.prior_refresh_every == 0 {
            return bad("prior_refresh_every must be >= 1");
        }
        if let Some(p) = &self.fixed_priors {
            if p.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
                return bad("fixed priors must lie in (0, 1]");
            }
        }
        self.estimator().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Priors used by this epoch's risk.
    pub priors: Vec<f64>,
    /// Present on epochs that re-estimated the priors.
    pub estimate: Option<PriorEstimate>,
    pub mean_loss: f64,
    pub prior_seconds: f64,
    pub epoch_seconds: f64,
    /// `|pi_hat_j - pi_j|`, when true priors were supplied.
    pub prior_abs_error: Option<Vec<f64>>,
    pub validation: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub warmup_losses: Vec<f64>,
    pub epochs: Vec<EpochRecord>,
    pub true_priors: Option<Vec<f64>>,
    /// Where the final model was written, if it was.
    pub checkpoint: Option<PathBuf>,
}

impl TrainReport {
    pub fn final_priors(&self) -> Option<&[f64]> {
        self.epochs.last().map(|e| e.priors.as_slice())
    }

    /// Per-epoch `max_j |pi_hat_j - pi_j|`.
    pub fn max_prior_errors(&self) -> Vec<f64> {
        self.epochs
            .iter()
            .filter_map(|e| e.prior_abs_error.as_ref())
            .map(|err| err.iter().copied().fold(0.0, f64::max))
            .collect()
    }
}

struct Loop<'a> {
    sp: &'a SinglePositiveDataset,
    batch_size: usize,
    rng: ChaCha8Rng,
    opt: Adam,
}

impl Loop<'_> {
    /// One shuffled pass; returns the mean batch loss.
    fn epoch(&mut self, model: &mut Classifier, kind: LossKind, risk: &RiskConfig) -> Result<f64> {
        let mut order: Vec<usize> = (0..self.sp.n()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut batches = 0;
        for rows in order.chunks(self.batch_size) {
            let x = self.sp.features().select(Axis(0), rows);
            let observed: Vec<usize> = rows.iter().map(|&i| self.sp.observed()[i]).collect();
            let sets = positive_sets(&observed, self.sp.c());
            let logits = model.forward_logits(x.view())?;
            total += loss_value(logits.view(), &sets, risk, kind)?;
            let upstream = risk_gradients(logits.view(), &sets, risk, kind)?;
            let grads = model.backward(x.view(), upstream.view())?;
            self.opt.step(model, &grads);
            batches += 1;
        }
        Ok(total / batches as f64)
    }
}

fn check_inputs(model: &Classifier, sp: &SinglePositiveDataset, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if model.input_dim() != sp.q() || model.output_dim() != sp.c() {
        return Err(CrispError::shape(
            format!("model {:?}", model.layer_dims()),
            format!("data with q = {}, c = {}", sp.q(), sp.c()),
        ));
    }
    if let Some(p) = &cfg.fixed_priors {
        if p.len() != sp.c() {
            return Err(CrispError::InvalidConfig(format!(
                "{} fixed priors for {} classes",
                p.len(),
                sp.c()
            )));
        }
    }
    Ok(())
}

fn new_loop<'a>(model: &Classifier, sp: &'a SinglePositiveDataset, cfg: &TrainConfig) -> Loop<'a> {
    Loop {
        sp,
        batch_size: cfg.batch_size,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        opt: Adam::new(
            AdamConfig::new(cfg.learning_rate, cfg.weight_decay),
            model.num_parameters(),
        ),
    }
}

fn run_warmup(model: &mut Classifier, lp: &mut Loop<'_>, epochs: usize) -> Result<Vec<f64>> {
    // Priors are unused by the cross-entropy.
    let risk = RiskConfig {
        lambda: 0.0,
        priors: vec![1.0; lp.sp.c()],
    };
    (0..epochs)
        .map(|_| lp.epoch(model, LossKind::AssumeNegative, &risk))
        .collect()
}

/// `warmup_epochs` passes of assume-negative cross-entropy.
pub fn warmup(
    mut model: Classifier,
    sp: &SinglePositiveDataset,
    cfg: &TrainConfig,
) -> Result<Classifier> {
    check_inputs(&model, sp, cfg)?;
    let mut lp = new_loop(&model, sp, cfg);
    run_warmup(&mut model, &mut lp, cfg.warmup_epochs)?;
    Ok(model)
}

/// Warm-up followed by `cfg.epochs` rounds of prior estimation and risk
/// minimisation. `true_priors`, when known, are used only for reporting.
pub fn train(
    mut model: Classifier,
    sp: &SinglePositiveDataset,
    cfg: &TrainConfig,
    val: Option<&MultiLabelDataset>,
    true_priors: Option<&[f64]>,
) -> Result<(Classifier, TrainReport)> {
    check_inputs(&model, sp, cfg)?;
    if let Some(t) = true_priors {
        if t.len() != sp.c() {
            return Err(CrispError::InvalidConfig(format!(
                "{} true priors for {} classes",
                t.len(),
                sp.c()
            )));
        }
    }
    if cfg.fixed_priors.is_none() {
        let sets = positive_sets(sp.observed(), sp.c());
        if let Some(j) = sets.iter().position(Vec::is_empty) {
            return Err(CrispError::NoObservedPositives { label: j });
        }
    }

    let mut lp = new_loop(&model, sp, cfg);
    let warmup_losses = run_warmup(&mut model, &mut lp, cfg.warmup_epochs)?;
    let estimator = cfg.estimator();
    let mut priors: Option<Vec<f64>> = cfg.fixed_priors.clone();
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for t in 0..cfg.epochs {
        let start = Instant::now();
        let mut estimate = None;
        if cfg.fixed_priors.is_none() && t % cfg.prior_refresh_every == 0 {
            let probs = model.forward_probs(sp.features().view())?;
            let est = estimate_all_priors(probs.view(), sp, &estimator, priors.as_deref())?;
            priors = Some(est.pi_hat.clone());
            estimate = Some(est);
        }
        let prior_seconds = start.elapsed().as_secs_f64();
        let current = priors.clone().expect("priors set before the first epoch");
        let risk = RiskConfig::new(current.clone(), cfg.lambda)?;
        let mean_loss = lp.epoch(&mut model, LossKind::CrispBiased, &risk)?;
        let epoch_seconds = start.elapsed().as_secs_f64();

        let validation = val.map(|v| evaluate(&model, v)).transpose()?;
        let prior_abs_error =
            true_priors.map(|tp| current.iter().zip(tp).map(|(a, b)| (a - b).abs()).collect());
        epochs.push(EpochRecord {
            epoch: t + 1,
            priors: current,
            estimate,
            mean_loss,
            prior_seconds,
            epoch_seconds,
            prior_abs_error,
            validation,
        });
    }

    Ok((
        model,
        TrainReport {
            warmup_losses,
            epochs,
            true_priors: true_priors.map(<[f64]>::to_vec),
            checkpoint: None,
        },
    ))
}

/// All six measures of `model` on a fully labeled set.
pub fn evaluate(model: &Classifier, test: &MultiLabelDataset) -> Result<MetricsReport> {
    let probs = model.forward_probs(test.features().view())?;
    MetricsReport::compute(probs.view(), test.labels().view())
}

/// Assume-negative cross-entropy of `model` over a whole dataset.
pub fn an_loss(model: &Classifier, sp: &SinglePositiveDataset) -> Result<f64> {
    let probs = model.forward_probs(sp.features().view())?;
    crate::risk::an_warmup_loss(probs.view(), sp.one_hot().view())
}
