//! Fully-connected compact model of polarization over `(v, dir, t_dl, t_fl)`.
//!
//! Layer `l` computes `z^(l) = W^(l)·a^(l−1) + b^(l)` and `a^(l) = σ(z^(l))`,
//! with `tanh` on hidden layers and identity on the output. Inputs and targets
//! are standardized with statistics fitted on the training data; the sweep
//! direction feature is passed through unscaled.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, DatasetSplit, Sample};
use crate::gradients;
use crate::oracle::{DeviceParams, SweepCurve};
use crate::{rng, Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Hidden widths of the desk-scale default network.
pub const DEFAULT_HIDDEN: [usize; 4] = [64; 4];
/// Hidden widths of the full-size network (four layers of 512).
pub const FULL_HIDDEN: [usize; 4] = [512; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// `σ'(z)`, given both `z` and the already computed `a = σ(z)`.
    #[inline]
    pub fn derivative(self, _z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// Dense layer with a row-major `out_dim × in_dim` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Layer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
            activation,
        }
    }

    #[inline]
    pub fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }
}

/// Per-feature standardization of inputs and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub output_mean: Vec<f64>,
    pub output_std: Vec<f64>,
}

impl Normalization {
    pub fn identity(in_dim: usize, out_dim: usize) -> Self {
        Normalization {
            input_mean: vec![0.0; in_dim],
            input_std: vec![1.0; in_dim],
            output_mean: vec![0.0; out_dim],
            output_std: vec![1.0; out_dim],
        }
    }

    /// Fits mean/std of `v`, `t_dl`, `t_fl` and `p`. `dir` keeps mean 0, std 1.
    /// Constant columns get std 1.
    pub fn fit(samples: &[Sample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::domain("cannot fit normalization on zero samples"));
        }
        let stats = |f: &dyn Fn(&Sample) -> f64| {
            let n = samples.len() as f64;
            let mean = samples.iter().map(f).sum::<f64>() / n;
            let var = samples.iter().map(|s| (f(s) - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            (mean, if std > 0.0 { std } else { 1.0 })
        };
        let (v_m, v_s) = stats(&|s| s.v);
        let (dl_m, dl_s) = stats(&|s| s.t_dl);
        let (fl_m, fl_s) = stats(&|s| s.t_fl);
        let (p_m, p_s) = stats(&|s| s.p);
        Ok(Normalization {
            input_mean: vec![v_m, 0.0, dl_m, fl_m],
            input_std: vec![v_s, 1.0, dl_s, fl_s],
            output_mean: vec![p_m],
            output_std: vec![p_s],
        })
    }

    fn validate(&self, in_dim: usize, out_dim: usize) -> Result<()> {
        if self.input_mean.len() != in_dim || self.input_std.len() != in_dim {
            return Err(Error::shape(
                format!("{in_dim} input statistics"),
                self.input_mean.len().min(self.input_std.len()),
            ));
        }
        if self.output_mean.len() != out_dim || self.output_std.len() != out_dim {
            return Err(Error::shape(
                format!("{out_dim} output statistics"),
                self.output_mean.len().min(self.output_std.len()),
            ));
        }
        let all = self.input_mean.iter().chain(&self.output_mean);
        if all.clone().any(|m| !m.is_finite())
            || self
                .input_std
                .iter()
                .chain(&self.output_std)
                .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return Err(Error::domain("normalization std must be positive and finite"));
        }
        Ok(())
    }

    pub fn normalize_output(&self, raw: f64, k: usize) -> f64 {
        (raw - self.output_mean[k]) / self.output_std[k]
    }

    pub fn denormalize_output(&self, z: f64, k: usize) -> f64 {
        z * self.output_std[k] + self.output_mean[k]
    }
}

/// Intermediate values of one batched forward pass, on normalized scales.
///
/// `activations[l]` is `a^(l)` for `l = 0..=L` (with `a^(0)` the normalized
/// input) and `pre_activations[l]` is `z^(l)`; `pre_activations[0]` is empty.
/// Each buffer is row-major `batch × width`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub batch: usize,
    pub activations: Vec<Vec<f64>>,
    pub pre_activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn depth(&self) -> usize {
        self.activations.len() - 1
    }

    /// Network output `a^(L)` on the normalized target scale.
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache has at least the input layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    layers: Vec<Layer>,
    norm: Normalization,
    seed: u64,
}

impl SurrogateModel {
    /// Glorot-uniform initialization; hidden layers use `tanh`, the output layer
    /// is linear.
    pub fn new(layer_sizes: &[usize], norm: Normalization, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::domain(format!(
                "layer sizes must list at least input and output widths, all positive: {layer_sizes:?}"
            )));
        }
        let mut rng = rng::seeded(seed);
        let depth = layer_sizes.len() - 1;
        let layers = layer_sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let activation = if l + 1 == depth {
                    Activation::Identity
                } else {
                    Activation::Tanh
                };
                let mut layer = Layer::zeros(w[0], w[1], activation);
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                for x in &mut layer.weights {
                    *x = rng.random_range(-limit..limit);
                }
                layer
            })
            .collect();
        Self::from_layers(layers, norm, seed)
    }

    /// Network for `(v, dir, t_dl, t_fl) → p` with the given hidden widths and
    /// normalization fitted on `samples`.
    pub fn for_samples(hidden: &[usize], samples: &[Sample], seed: u64) -> Result<Self> {
        let mut sizes = vec![Sample::N_FEATURES];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self::new(&sizes, Normalization::fit(samples)?, seed)
    }

    pub fn from_layers(layers: Vec<Layer>, norm: Normalization, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::domain("a model needs at least one layer"));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.in_dim * layer.out_dim {
                return Err(Error::shape(
                    format!("{}x{} weights in layer {}", layer.out_dim, layer.in_dim, l + 1),
                    layer.weights.len(),
                ));
            }
            if layer.biases.len() != layer.out_dim {
                return Err(Error::shape(
                    format!("{} biases in layer {}", layer.out_dim, l + 1),
                    layer.biases.len(),
                ));
            }
            if l > 0 && layers[l - 1].out_dim != layer.in_dim {
                return Err(Error::shape(
                    format!("layer {} input width {}", l + 1, layers[l - 1].out_dim),
                    layer.in_dim,
                ));
            }
        }
        let in_dim = layers[0].in_dim;
        let out_dim = layers.last().unwrap().out_dim;
        norm.validate(in_dim, out_dim)?;
        Ok(SurrogateModel { layers, norm, seed })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].in_dim)
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn batch_size_of(&self, inputs: &[f64]) -> Result<usize> {
        let dim = self.input_dim();
        if inputs.len() % dim != 0 {
            return Err(Error::shape(
                format!("a multiple of {dim} input values"),
                inputs.len(),
            ));
        }
        Ok(inputs.len() / dim)
    }

    /// Forward pass over a row-major batch of raw inputs, retaining every
    /// `z^(l)` and `a^(l)`.
    pub fn forward_cached(&self, inputs: &[f64]) -> Result<ForwardCache> {
        let batch = self.batch_size_of(inputs)?;
        let dim = self.input_dim();
        let mut a0 = inputs.to_vec();
        for row in a0.chunks_exact_mut(dim) {
            for (j, x) in row.iter_mut().enumerate() {
                *x = (*x - self.norm.input_mean[j]) / self.norm.input_std[j];
            }
        }
        Ok(self.forward_normalized(a0, batch))
    }

    fn forward_normalized(&self, a0: Vec<f64>, batch: usize) -> ForwardCache {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(a0);
        pre_activations.push(Vec::new());
        for layer in &self.layers {
            let prev = activations.last().unwrap();
            let mut z = vec![0.0; batch * layer.out_dim];
            for (x, zr) in prev
                .chunks_exact(layer.in_dim)
                .zip(z.chunks_exact_mut(layer.out_dim))
            {
                for (o, zo) in zr.iter_mut().enumerate() {
                    *zo = layer.biases[o] + dot(layer.row(o), x);
                }
            }
            let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre_activations.push(z);
            activations.push(a);
        }
        ForwardCache {
            batch,
            activations,
            pre_activations,
        }
    }

    /// Raw-scale predictions for a row-major batch of raw inputs.
    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let cache = self.forward_cached(inputs)?;
        Ok(self.denormalize(cache.output()))
    }

    pub fn denormalize(&self, normalized: &[f64]) -> Vec<f64> {
        let k = self.output_dim();
        normalized
            .iter()
            .enumerate()
            .map(|(i, &y)| self.norm.denormalize_output(y, i % k))
            .collect()
    }

    /// Feature rows `(v, dir, θ)` at every point of `grid`.
    pub fn sweep_inputs(params: DeviceParams, grid: &SweepCurve) -> Vec<f64> {
        grid.points
            .iter()
            .flat_map(|pt| [pt.v, pt.dir.sign(), params.t_dl, params.t_fl])
            .collect()
    }

    /// Predicted loop for `params`, sampled on the voltage grid of `grid`.
    pub fn predict_sweep(&self, params: DeviceParams, grid: &SweepCurve) -> Result<SweepCurve> {
        let p = self.forward(&Self::sweep_inputs(params, grid))?;
        Ok(grid.with_polarization(params, &p))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(1/n)·Σ(y − ŷ)²`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    crate::metrics::mse(pred, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain update `W ← W − α·∂L/∂W`.
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Stop after this many epochs without a validation improvement.
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 400,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            early_stop_patience: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.early_stop_patience == 0 {
            return Err(Error::Config(
                "batch_size and early_stop_patience must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean minibatch loss on the normalized target scale.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Gradients of the normalized-scale MSE with respect to every weight and bias.
#[derive(Debug, Clone)]
pub struct WeightGradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl SurrogateModel {
    /// Normalized-scale MSE of a raw batch and its weight gradients.
    pub fn loss_and_weight_gradients(
        &self,
        inputs: &[f64],
        targets: &[f64],
    ) -> Result<(f64, WeightGradients)> {
        let cache = self.forward_cached(inputs)?;
        let k = self.output_dim();
        if targets.len() != cache.batch * k {
            return Err(Error::shape(cache.batch * k, targets.len()));
        }
        let y: Vec<f64> = targets
            .iter()
            .enumerate()
            .map(|(i, &t)| self.norm.normalize_output(t, i % k))
            .collect();
        let loss = mse_loss(cache.output(), &y)?;
        let delta_out = gradients::output_delta(self, &cache, &y)?;
        let deltas = gradients::backpropagate_delta(self, &cache, &delta_out)?;

        // dL/dW^(l) = Σ_batch δ^(l) a^(l-1)ᵀ, dL/db^(l) = Σ_batch δ^(l)
        let mut gw = Vec::with_capacity(self.layers.len());
        let mut gb = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut dw = vec![0.0; layer.weights.len()];
            let mut db = vec![0.0; layer.out_dim];
            let a_prev = &cache.activations[l];
            let delta = &deltas[l + 1];
            for (x, d) in a_prev
                .chunks_exact(layer.in_dim)
                .zip(delta.chunks_exact(layer.out_dim))
            {
                for (o, &d_o) in d.iter().enumerate() {
                    db[o] += d_o;
                    let row = &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (w, &xi) in row.iter_mut().zip(x) {
                        *w += d_o * xi;
                    }
                }
            }
            gw.push(dw);
            gb.push(db);
        }
        Ok((
            loss,
            WeightGradients {
                weights: gw,
                biases: gb,
            },
        ))
    }

    /// Normalized-scale MSE over a set of samples (output width 1).
    pub fn normalized_loss(&self, samples: &[Sample]) -> Result<f64> {
        let cache = self.forward_cached(&dataset::feature_matrix(samples))?;
        let y: Vec<f64> = samples
            .iter()
            .map(|s| self.norm.normalize_output(s.p, 0))
            .collect();
        mse_loss(cache.output(), &y)
    }
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

fn apply_update(
    params: &mut [f64],
    grads: &[f64],
    slot: usize,
    cfg: &TrainConfig,
    adam: &mut Option<AdamState>,
) {
    match adam {
        None => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= cfg.learning_rate * g;
            }
        }
        Some(state) => {
            let bc1 = 1.0 - cfg.beta1.powi(state.t);
            let bc2 = 1.0 - cfg.beta2.powi(state.t);
            let (m, v) = (&mut state.m[slot], &mut state.v[slot]);
            for i in 0..params.len() {
                let g = grads[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Minibatch training on `split.train` with early stopping on the validation
/// loss (training loss when the validation split is empty).
///
/// Returns the best-scoring weights and the loss trace; entry 0 of the trace
/// holds the losses of the untrained model.
pub fn train(
    model: &SurrogateModel,
    split: &DatasetSplit,
    cfg: &TrainConfig,
) -> Result<(SurrogateModel, Vec<EpochLoss>)> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::domain("cannot train on an empty training split"));
    }
    if model.input_dim() != Sample::N_FEATURES || model.output_dim() != 1 {
        return Err(Error::shape(
            format!("{} inputs and 1 output", Sample::N_FEATURES),
            format!("{:?}", model.layer_sizes()),
        ));
    }

    let features = dataset::feature_matrix(&split.train);
    let targets = dataset::targets(&split.train);
    let val_loss = |m: &SurrogateModel| -> Result<Option<f64>> {
        if split.validation.is_empty() {
            Ok(None)
        } else {
            m.normalized_loss(&split.validation).map(Some)
        }
    };

    let mut current = model.clone();
    let initial = EpochLoss {
        epoch: 0,
        train_loss: current.normalized_loss(&split.train)?,
        val_loss: val_loss(&current)?,
    };
    let score = |e: &EpochLoss| e.val_loss.unwrap_or(e.train_loss);
    let mut best = current.clone();
    let mut best_score = score(&initial);
    let mut since_best = 0;
    let mut trace = vec![initial];

    let slots = current.layers.len() * 2;
    let mut adam = (cfg.optimizer == Optimizer::Adam).then(|| AdamState {
        m: current
            .layers
            .iter()
            .flat_map(|l| [vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]])
            .collect(),
        v: current
            .layers
            .iter()
            .flat_map(|l| [vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]])
            .collect(),
        t: 0,
    });
    debug_assert!(adam.as_ref().is_none_or(|a| a.m.len() == slots));

    let mut rng = rng::seeded(cfg.seed);
    let n = split.train.len();
    let dim = Sample::N_FEATURES;
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch_x = Vec::with_capacity(cfg.batch_size * dim);
    let mut batch_y = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.extend_from_slice(&features[i * dim..(i + 1) * dim]);
                batch_y.push(targets[i]);
            }
            let (loss, grads) = current.loss_and_weight_gradients(&batch_x, &batch_y)?;
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: format!("minibatch loss is {loss}"),
                });
            }
            loss_sum += loss * chunk.len() as f64;
            if let Some(state) = adam.as_mut() {
                state.t += 1;
            }
            for (l, layer) in current.layers.iter_mut().enumerate() {
                apply_update(&mut layer.weights, &grads.weights[l], 2 * l, cfg, &mut adam);
                apply_update(&mut layer.biases, &grads.biases[l], 2 * l + 1, cfg, &mut adam);
            }
        }
        let entry = EpochLoss {
            epoch,
            train_loss: loss_sum / n as f64,
            val_loss: val_loss(&current)?,
        };
        let s = score(&entry);
        if !s.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: format!("validation loss is {s}"),
            });
        }
        trace.push(entry);
        if s < best_score {
            best_score = s;
            best = current.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                break;
            }
        }
    }
    Ok((best, trace))
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    normalization: Normalization,
    seed: u64,
}

impl SurrogateModel {
    /// Canonical JSON document; fields appear in a fixed order and floats use
    /// shortest round-trip formatting.
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            layer_sizes: self.layer_sizes(),
            activations: self.layers.iter().map(|l| l.activation).collect(),
            weights: self.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: self.layers.iter().map(|l| l.biases.clone()).collect(),
            normalization: self.norm.clone(),
            seed: self.seed,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Load(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Load(format!(
                "unsupported format_version {} (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            )));
        }
        let depth = file.layer_sizes.len().saturating_sub(1);
        if depth == 0
            || file.activations.len() != depth
            || file.weights.len() != depth
            || file.biases.len() != depth
        {
            return Err(Error::Load(format!(
                "layer_sizes {:?} disagree with {} activation, {} weight and {} bias entries",
                file.layer_sizes,
                file.activations.len(),
                file.weights.len(),
                file.biases.len()
            )));
        }
        let layers = (0..depth)
            .map(|l| Layer {
                in_dim: file.layer_sizes[l],
                out_dim: file.layer_sizes[l + 1],
                weights: file.weights[l].clone(),
                biases: file.biases[l].clone(),
                activation: file.activations[l],
            })
            .collect();
        Self::from_layers(layers, file.normalization, file.seed)
            .map_err(|e| Error::Load(e.to_string()))
    }
}

pub fn save_model(model: &SurrogateModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model.to_json())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SurrogateModel> {
    SurrogateModel::from_json(&fs::read_to_string(path)?)
}
