//! Adaptive moment estimation with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::model::{Classifier, GradientSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimiser state. Moments are stored flat, in [`Classifier::parameters`]
/// order.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, num_parameters: usize) -> Self {
        Self {
            cfg,
            first: vec![0.0; num_parameters],
            second: vec![0.0; num_parameters],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    /// One update:
    ///
    /// ```text
    /// theta <- theta - lr * wd * theta
    /// m <- b1 m + (1 - b1) g          v <- b2 v + (1 - b2) g^2
    /// theta <- theta - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
    /// ```
    pub fn step(&mut self, model: &mut Classifier, grads: &GradientSet) {
        self.steps += 1;
        let AdamConfig {
            learning_rate: lr,
            weight_decay: wd,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.cfg;
        let bias1 = 1.0 - b1.powi(self.steps as i32);
        let bias2 = 1.0 - b2.powi(self.steps as i32);
        let grad_iter = grads
            .layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()));
        for (((theta, &g), m), v) in model
            .parameters_mut()
            .zip(grad_iter)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            *theta -= lr * wd * *theta;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *theta -= lr * (*m / bias1) / ((*v / bias2).sqrt() + eps);
        }
    }
}
