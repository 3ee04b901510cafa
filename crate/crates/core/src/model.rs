//! Shallow multi-label classifiers with hand-derived gradients.
//!
//! Two architectures are supported: a linear map `q -> c` and a single
//! rectified hidden layer `q -> h -> c`. Both produce logits `g`; label
//! probabilities are `f = sigmoid(g)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CrispError, Result};

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(g: f64) -> f64 {
    if g >= 0.0 {
        1.0 / (1.0 + (-g).exp())
    } else {
        let e = g.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid'(g) = sigmoid(g) * sigmoid(-g)`, without cancellation.
#[inline]
pub fn sigmoid_grad(g: f64) -> f64 {
    sigmoid(g) * sigmoid(-g)
}

/// Largest double below one; probabilities are kept inside `(0, 1)`.
const PROB_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Architecture {
    #[default]
    Linear,
    Hidden { width: usize },
}

/// Dense affine layer `x W + b`, with `W` stored input-major (`in x out`).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = || rng.random_range(-bound..=bound);
        Self {
            weights: Array2::from_shape_simple_fn((fan_in, fan_out), &mut draw),
            bias: Array1::from_shape_simple_fn(fan_out, &mut draw),
        }
    }

    fn affine(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.bias
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Multi-label probabilistic classifier. Every layer but the last is
/// followed by a rectifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    layers: Vec<Layer>,
}

/// Gradient of a scalar loss with respect to every [`Classifier`] parameter.
/// Shares the classifier's layer layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<Layer>,
}

impl GradientSet {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Classifier {
    /// Seeded initialisation, uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(arch: Architecture, q: usize, c: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = match arch {
            Architecture::Linear => vec![Layer::uniform(q, c, &mut rng)],
            Architecture::Hidden { width } => vec![
                Layer::uniform(q, width, &mut rng),
                Layer::uniform(width, c, &mut rng),
            ],
        };
        Self { layers }
    }

    /// All-zero parameters.
    pub fn zeros(arch: Architecture, q: usize, c: usize) -> Self {
        let layers = match arch {
            Architecture::Linear => vec![Layer::zeros(q, c)],
            Architecture::Hidden { width } => vec![Layer::zeros(q, width), Layer::zeros(width, c)],
        };
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() || layers.len() > 2 {
            return Err(CrispError::InvalidConfig(
                "classifier needs one or two layers".into(),
            ));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.weights.ncols() != l.bias.len() || l.weights.is_empty() {
                return Err(CrispError::shape(
                    format!("bias of length {}", l.weights.ncols()),
                    format!("layer {k} bias of length {}", l.bias.len()),
                ));
            }
            if k > 0 && layers[k - 1].weights.ncols() != l.weights.nrows() {
                return Err(CrispError::shape(
                    format!("layer {k} input width {}", layers[k - 1].weights.ncols()),
                    l.weights.nrows(),
                ));
            }
            if !l.is_finite() {
                return Err(CrispError::Checkpoint("non-finite parameter".into()));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn architecture(&self) -> Architecture {
        match self.layers.len() {
            1 => Architecture::Linear,
            _ => Architecture::Hidden {
                width: self.layers[0].weights.ncols(),
            },
        }
    }

    /// `[q, (h)?, c]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].weights.nrows()];
        dims.extend(self.layers.iter().map(|l| l.weights.ncols()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.ncols()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(CrispError::shape(
                format!("{} feature columns", self.input_dim()),
                format!("{} feature columns", x.ncols()),
            ));
        }
        Ok(())
    }

    /// Logits `g(x_i)`, one row per instance.
    pub fn forward_logits(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut h = self.layers[0].affine(x);
        for layer in &self.layers[1..] {
            h.mapv_inplace(|v| v.max(0.0));
            h = layer.affine(h.view());
        }
        Ok(h)
    }

    /// Label probabilities `sigmoid(g)`, strictly inside `(0, 1)`.
    pub fn forward_probs(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(probabilities(&self.forward_logits(x)?))
    }

    /// Gradient of `sum_i L_i` given `upstream[i, j] = dL/dg_ij`.
    pub fn backward(&self, x: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Result<GradientSet> {
        self.check_input(x)?;
        if upstream.dim() != (x.nrows(), self.output_dim()) {
            return Err(CrispError::shape(
                format!("{}x{} upstream gradient", x.nrows(), self.output_dim()),
                format!("{}x{}", upstream.nrows(), upstream.ncols()),
            ));
        }
        let layers = match self.layers.as_slice() {
            [_] => vec![Layer {
                weights: x.t().dot(&upstream),
                bias: upstream.sum_axis(Axis(0)),
            }],
            [hidden, out] => {
                let pre = hidden.affine(x);
                let act = pre.mapv(|v| v.max(0.0));
                let mut d_hidden = upstream.dot(&out.weights.t());
                Zip::from(&mut d_hidden)
                    .and(&pre)
                    .for_each(|d, &p| if p <= 0.0 { *d = 0.0 });
                vec![
                    Layer {
                        weights: x.t().dot(&d_hidden),
                        bias: d_hidden.sum_axis(Axis(0)),
                    },
                    Layer {
                        weights: act.t().dot(&upstream),
                        bias: upstream.sum_axis(Axis(0)),
                    },
                ]
            }
            _ => unreachable!("classifier has one or two layers"),
        };
        Ok(GradientSet { layers })
    }

    /// Visits every parameter in checkpoint order (per layer: weights
    /// row-major, then bias).
    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_checkpoint(self, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        read_checkpoint(&mut BufReader::new(File::open(path)?))
    }
}

/// Elementwise probabilities from logits, clamped into the open unit interval.
pub fn probabilities(logits: &Array2<f64>) -> Array2<f64> {
    logits.mapv(|g| sigmoid(g).clamp(f64::MIN_POSITIVE, PROB_MAX))
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CRISPCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Binary layout, all integers and floats little-endian:
///
/// ```text
/// magic     8 bytes  "CRISPCKP"
/// version   u32      1
/// n_dims    u32      2 (linear) or 3 (hidden layer)
/// dims      u64 * n_dims   [q, (h), c]
/// params    f64 * P  per layer: weights (in x out, row-major), then bias
/// ```
pub fn write_checkpoint(model: &Classifier, w: &mut impl Write) -> Result<()> {
    let dims = model.layer_dims();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for d in &dims {
        w.write_all(&(*d as u64).to_le_bytes())?;
    }
    for p in model.parameters() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => CrispError::Checkpoint("truncated file".into()),
        _ => CrispError::Io(e),
    })?;
    Ok(buf)
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Classifier> {
    if &read_exact::<8>(r)? != CHECKPOINT_MAGIC {
        return Err(CrispError::Checkpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(read_exact(r)?);
    if version != CHECKPOINT_VERSION {
        return Err(CrispError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let n_dims = u32::from_le_bytes(read_exact(r)?) as usize;
    if !(2..=3).contains(&n_dims) {
        return Err(CrispError::Checkpoint(format!("bad layer count {n_dims}")));
    }
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        let d = u64::from_le_bytes(read_exact(r)?);
        if d == 0 || d > 1 << 24 {
            return Err(CrispError::Checkpoint(format!("bad layer width {d}")));
        }
        dims.push(d as usize);
    }
    let mut layers = Vec::with_capacity(n_dims - 1);
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let mut next = || -> Result<f64> {
            let v = f64::from_le_bytes(read_exact(r)?);
            if !v.is_finite() {
                return Err(CrispError::Checkpoint("non-finite parameter".into()));
            }
            Ok(v)
        };
        let weights = (0..fan_in * fan_out).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let bias = (0..fan_out).map(|_| next()).collect::<Result<Vec<_>>>()?;
        layers.push(Layer {
            weights: Array2::from_shape_vec((fan_in, fan_out), weights).expect("sized buffer"),
            bias: Array1::from(bias),
        });
    }
    Classifier::from_layers(layers)
}
