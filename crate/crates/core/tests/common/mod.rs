//! Slow, literal re-implementations used as test oracles, plus fixtures.
//!
//! Nothing here calls into the library code it is checking.

#![allow(dead_code)]

use crisp::model::Classifier;
use crisp::risk::{loss_value, risk_gradients, LossKind, RiskConfig};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- metrics

/// `|{k : s_k >= s_j}|`, counted by scanning.
fn rank(scores: &[f64], j: usize) -> usize {
    scores.iter().filter(|&&s| s >= scores[j]).count()
}

pub fn hamming(probs: &Array2<f64>, labels: &Array2<u8>) -> f64 {
    let mut wrong = 0;
    for i in 0..probs.nrows() {
        for j in 0..probs.ncols() {
            let predicted = u8::from(probs[[i, j]] >= 0.5);
            if predicted != labels[[i, j]] {
                wrong += 1;
            }
        }
    }
    wrong as f64 / probs.len() as f64
}

pub fn ranking_loss(probs: &Array2<f64>, labels: &Array2<u8>) -> Option<f64> {
    let mut total = 0.0;
    let mut counted = 0;
    for i in 0..probs.nrows() {
        let mut bad = 0.0;
        let mut pairs = 0;
        for a in 0..probs.ncols() {
            for b in 0..probs.ncols() {
                if labels[[i, a]] == 1 && labels[[i, b]] == 0 {
                    pairs += 1;
                    if probs[[i, a]] < probs[[i, b]] {
                        bad += 1.0;
                    } else if probs[[i, a]] == probs[[i, b]] {
                        bad += 0.5;
                    }
                }
            }
        }
        if pairs > 0 {
            total += bad / pairs as f64;
            counted += 1;
        }
    }
    (counted > 0).then(|| total / counted as f64)
}

pub fn one_error(probs: &Array2<f64>, labels: &Array2<u8>) -> Option<f64> {
    let mut misses = 0;
    let mut counted = 0;
    for i in 0..probs.nrows() {
        if labels.row(i).iter().all(|&y| y == 0) {
            continue;
        }
        let mut top = 0;
        for j in 1..probs.ncols() {
            if probs[[i, j]] > probs[[i, top]] {
                top = j;
            }
        }
        counted += 1;
        if labels[[i, top]] == 0 {
            misses += 1;
        }
    }
    (counted > 0).then(|| misses as f64 / counted as f64)
}

pub fn coverage(probs: &Array2<f64>, labels: &Array2<u8>) -> Option<f64> {
    let c = probs.ncols();
    let mut total = 0.0;
    let mut counted = 0;
    for i in 0..probs.nrows() {
        let scores = probs.row(i).to_vec();
        let worst = (0..c).filter(|&j| labels[[i, j]] == 1).map(|j| rank(&scores, j)).max();
        if let Some(r) = worst {
            total += (r - 1) as f64 / c as f64;
            counted += 1;
        }
    }
    (counted > 0).then(|| total / counted as f64)
}

fn precision_average(scores: &[f64], relevant: &[bool]) -> Option<f64> {
    let rel: Vec<usize> = (0..scores.len()).filter(|&j| relevant[j]).collect();
    if rel.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    for &j in &rel {
        let rj = rank(scores, j);
        let above = rel.iter().filter(|&&k| rank(scores, k) <= rj).count();
        sum += above as f64 / rj as f64;
    }
    Some(sum / rel.len() as f64)
}

pub fn average_precision(probs: &Array2<f64>, labels: &Array2<u8>) -> Option<f64> {
    let values: Vec<f64> = (0..probs.nrows())
        .filter_map(|i| {
            let rel: Vec<bool> = labels.row(i).iter().map(|&y| y == 1).collect();
            precision_average(&probs.row(i).to_vec(), &rel)
        })
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn mean_average_precision(probs: &Array2<f64>, labels: &Array2<u8>) -> Option<f64> {
    let values: Vec<f64> = (0..probs.ncols())
        .filter_map(|j| {
            let rel: Vec<bool> = labels.column(j).iter().map(|&y| y == 1).collect();
            precision_average(&probs.column(j).to_vec(), &rel)
        })
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Scores on a coarse grid so that ties are common.
pub fn grid_scores(rng: &mut ChaCha8Rng, n: usize, c: usize, levels: u32) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, c), || f64::from(rng.random_range(1..levels)) / f64::from(levels))
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, c: usize, p: f64) -> Array2<u8> {
    Array2::from_shape_simple_fn((n, c), || u8::from(rng.random_bool(p)))
}

// ---------------------------------------------------------- prior estimate

#[derive(Debug, Clone, Copy)]
pub struct BruteEstimate {
    pub z: f64,
    pub ratio: f64,
    pub objective: f64,
    pub pi: f64,
}

/// Tries every distinct score as the threshold, counting tails from
/// scratch each time.
pub fn brute_force_prior(scores: &[f64], labeled: &[usize], delta: f64, tau: f64) -> BruteEstimate {
    let n = scores.len() as f64;
    let np = labeled.len() as f64;
    let dev = ((4.0 / delta).ln() / (2.0 * n)).sqrt() + ((4.0 / delta).ln() / (2.0 * np)).sqrt();
    let mut best: Option<BruteEstimate> = None;
    for &z in scores {
        let q = scores.iter().filter(|&&s| s >= z).count() as f64 / n;
        let qp = labeled.iter().filter(|&&i| scores[i] >= z).count() as f64 / np;
        if qp == 0.0 {
            continue;
        }
        let objective = q / qp + (1.0 + tau) / qp * dev;
        let better = match best {
            None => true,
            Some(b) => objective < b.objective || (objective == b.objective && z < b.z),
        };
        if better {
            best = Some(BruteEstimate {
                z,
                ratio: q / qp,
                objective,
                pi: (q / qp).clamp(1.0 / n, 1.0),
            });
        }
    }
    best.expect("some labeled score is a candidate")
}

// ---------------------------------------------------------- risk oracles

/// `mean_i sum_j |y_ij - f_ij|` by loops.
pub fn full_risk(probs: &Array2<f64>, labels: &Array2<u8>) -> f64 {
    let mut s = 0.0;
    for ((i, j), &f) in probs.indexed_iter() {
        s += (f64::from(labels[[i, j]]) - f).abs();
    }
    s / probs.nrows() as f64
}

// ------------------------------------------------------ finite differences

pub fn random_params(model: &mut Classifier, rng: &mut ChaCha8Rng) {
    for p in model.parameters_mut() {
        *p = rng.random_range(-1.0..=1.0);
    }
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, n: usize, q: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, q), || rng.random_range(-1.0..=1.0))
}

/// Analytic and central-difference gradients of a loss over all
/// parameters, in checkpoint order.
pub fn gradient_pair(
    model: &Classifier,
    x: ArrayView2<f64>,
    sets: &[Vec<usize>],
    cfg: &RiskConfig,
    kind: LossKind,
    eps: f64,
) -> (Vec<f64>, Vec<f64>) {
    let loss = |m: &Classifier| {
        let logits = m.forward_logits(x).unwrap();
        loss_value(logits.view(), sets, cfg, kind).unwrap()
    };
    let logits = model.forward_logits(x).unwrap();
    let upstream = risk_gradients(logits.view(), sets, cfg, kind).unwrap();
    let grads = model.backward(x, upstream.view()).unwrap();
    let analytic: Vec<f64> = grads
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>())
        .collect();

    let count = model.num_parameters();
    let mut numeric = Vec::with_capacity(count);
    for k in 0..count {
        let mut plus = model.clone();
        *plus.parameters_mut().nth(k).unwrap() += eps;
        let mut minus = model.clone();
        *minus.parameters_mut().nth(k).unwrap() -= eps;
        numeric.push((loss(&plus) - loss(&minus)) / (2.0 * eps));
    }
    (analytic, numeric)
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
