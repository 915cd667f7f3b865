use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{clip_prob, sigmoid};
use crate::error::{Error, Result};

static NEXT_GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    NEXT_GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Dense layer; `weights` has shape (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Feed-forward network: ReLU hidden layers, one sigmoid output unit.
#[derive(Debug, Clone)]
pub struct Predictor {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
    seed: u64,
    // Changes on every parameter update; a forward pass remembers the value
    // it was computed under.
    generation: u64,
}

impl PartialEq for Predictor {
    fn eq(&self, other: &Self) -> bool {
        self.layer_sizes == other.layer_sizes && self.seed == other.seed && self.layers == other.layers
    }
}

/// Activations cached by [`Predictor::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    generation: u64,
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    hidden_pre: Vec<Array2<f64>>,
    /// Output pre-activation z.
    pub logits: Array1<f64>,
    /// Clipped sigmoid(z).
    pub probs: Array1<f64>,
}

impl ForwardPass {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Parameter gradients, one (weights, bias) pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(p: &Predictor) -> Self {
        Self {
            layers: p
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, a: f64) {
        for l in &mut self.layers {
            l.weights *= a;
            l.bias *= a;
        }
    }

    /// `self += a * other`
    pub fn add_scaled(&mut self, a: f64, other: &Gradients) {
        for (l, o) in self.layers.iter_mut().zip(&other.layers) {
            l.weights.scaled_add(a, &o.weights);
            l.bias.scaled_add(a, &o.bias);
        }
    }

    /// Row-major weights then bias, layer by layer.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Predictor {
    /// Glorot-uniform weights drawn from `seed`, zero biases.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        Self::check_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..=limit));
                Layer {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
            seed,
            generation: next_generation(),
        })
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        Self::check_sizes(layer_sizes)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer {
                weights: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
            seed: 0,
            generation: next_generation(),
        })
    }

    /// Builds a network from explicit parameters.
    pub fn from_layers(layers: Vec<Layer>, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("network needs at least one layer".into()));
        }
        let mut sizes = vec![layers[0].weights.ncols()];
        for (i, l) in layers.iter().enumerate() {
            if l.weights.ncols() != *sizes.last().expect("non-empty") || l.bias.len() != l.weights.nrows() {
                return Err(Error::Validation(format!("layer {i} has inconsistent shapes")));
            }
            sizes.push(l.weights.nrows());
        }
        Self::check_sizes(&sizes)?;
        if layers
            .iter()
            .any(|l| l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()))
        {
            return Err(Error::Validation("network parameters must be finite".into()));
        }
        Ok(Self {
            layer_sizes: sizes,
            layers,
            seed,
            generation: next_generation(),
        })
    }

    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 {
            return Err(Error::Validation(
                "layer_sizes needs an input and an output size".into(),
            ));
        }
        if sizes.contains(&0) {
            return Err(Error::Validation("layer sizes must be positive".into()));
        }
        if *sizes.last().expect("len >= 2") != 1 {
            return Err(Error::Validation("the output layer must have exactly one unit".into()));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_params(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Validation(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = it.next().expect("length checked");
            }
            for b in l.bias.iter_mut() {
                *b = it.next().expect("length checked");
            }
        }
        self.generation = next_generation();
        Ok(())
    }

    /// Batch forward pass; rows of `x` are samples.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<ForwardPass> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Validation(format!(
                "input has {} features, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let n_hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut hidden_pre = Vec::with_capacity(n_hidden);
        let mut a = x.to_owned();
        for layer in &self.layers[..n_hidden] {
            let pre = a.dot(&layer.weights.t()) + &layer.bias;
            let act = pre.mapv(|v| v.max(0.0));
            inputs.push(a);
            hidden_pre.push(pre);
            a = act;
        }
        let out = &self.layers[n_hidden];
        let logits: Array1<f64> = a.dot(&out.weights.row(0)) + out.bias[0];
        inputs.push(a);
        let probs = logits.mapv(|z| clip_prob(sigmoid(z)));
        Ok(ForwardPass {
            generation: self.generation,
            inputs,
            hidden_pre,
            logits,
            probs,
        })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.probs.to_vec())
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<f64> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Validation(e.to_string()))?;
        Ok(self.forward(view)?.probs[0])
    }

    /// Gradients of J = sum_i g_i * z_i, where `dz[i]` is the upstream
    /// derivative dJ/dz for sample i and z is the output pre-activation.
    pub fn backward(&self, pass: &ForwardPass, dz: &[f64]) -> Result<Gradients> {
        if pass.generation != self.generation {
            return Err(Error::State(
                "forward cache is stale: parameters changed since the forward pass".into(),
            ));
        }
        if dz.len() != pass.len() {
            return Err(Error::Validation(format!(
                "upstream gradient has {} entries for a batch of {}",
                dz.len(),
                pass.len()
            )));
        }
        let n_layers = self.layers.len();
        let mut grads = Vec::with_capacity(n_layers);
        let mut delta = Array2::from_shape_vec((dz.len(), 1), dz.to_vec()).expect("shape matches");
        for l in (0..n_layers).rev() {
            let input = &pass.inputs[l];
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights);
                ndarray::Zip::from(&mut back)
                    .and(&pass.hidden_pre[l - 1])
                    .for_each(|d, &pre| {
                        if pre <= 0.0 {
                            *d = 0.0;
                        }
                    });
                delta = back;
            }
            grads.push(Layer { weights: gw, bias: gb });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Gradient-descent step `params -= lr * grads`.
    pub fn apply_update(&mut self, grads: &Gradients, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.scaled_add(-lr, &g.weights);
            l.bias.scaled_add(-lr, &g.bias);
        }
        self.generation = next_generation();
    }
}
