//! From-scratch multilayer perceptron: forward pass, mean cross-entropy,
//! backpropagation, and clipped mini-batch SGD.
//!
//! Hidden layers use ReLU; the output layer is a softmax over classes. All
//! arithmetic is `f64`. Training is bit-reproducible: the only source of
//! randomness is the explicit seed, which drives per-epoch reshuffling.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{dim_err, usage_err, Result};
use crate::matrix::Matrix;
use crate::rng::{derive2, SeqRng};

/// One dense layer: `weights` is `fan_in x fan_out`, `bias` has `fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// The full parameter set of the MLP; the unit transmitted between client
/// and server.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
}

/// Flat parameter ordering: for each layer, weights row-major then biases.
/// `dp::perturb` and the noise-plan coordinates rely on this order.
impl ModelParams {
    /// Glorot-style initialization: weights uniform in
    /// `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`, biases zero.
    pub fn init_glorot(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return usage_err("need at least input and output layer sizes");
        }
        let mut rng = SeqRng::new(seed);
        let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            let mut weights = Matrix::zeros(fan_in, fan_out);
            for v in weights.as_mut_slice() {
                *v = rng.next_range(-a, a);
            }
            layers.push(Layer {
                weights,
                bias: vec![0.0; fan_out],
            });
        }
        Ok(ModelParams { layers })
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return usage_err("need at least input and output layer sizes");
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer {
                weights: Matrix::zeros(w[0], w[1]),
                bias: vec![0.0; w[1]],
            })
            .collect();
        Ok(ModelParams { layers })
    }

    /// `(fan_in, fan_out)` per layer.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .map(|l| (l.weights.rows(), l.weights.cols()))
            .collect()
    }

    pub fn num_features(&self) -> usize {
        self.layers[0].weights.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map(|l| l.weights.cols()).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum()
    }

    /// Adjacent shape compatibility and finiteness of every entry.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return usage_err("model has no layers");
        }
        for pair in self.layers.windows(2) {
            if pair[0].weights.cols() != pair[1].weights.rows() {
                return dim_err("adjacent layer shapes incompatible");
            }
        }
        for l in &self.layers {
            if l.bias.len() != l.weights.cols() {
                return dim_err("bias length does not match fan_out");
            }
            if l.weights.as_slice().iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return usage_err("non-finite model parameter");
            }
        }
        Ok(())
    }

    fn same_shape(&self, other: &ModelParams) -> bool {
        self.shapes() == other.shapes()
    }

    /// L2 norm of all parameters flattened (weights and biases).
    pub fn l2_norm(&self) -> f64 {
        let mut sq = 0.0;
        for l in &self.layers {
            for &v in l.weights.as_slice() {
                sq += v * v;
            }
            for &v in &l.bias {
                sq += v * v;
            }
        }
        libm::sqrt(sq)
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for l in &mut self.layers {
            for v in l.weights.as_mut_slice() {
                *v *= factor;
            }
            for v in &mut l.bias {
                *v *= factor;
            }
        }
    }
}

/// A mini-batch: `inputs` is `batch x features`, labels are class indices.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Matrix, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() == 0 {
            return usage_err("empty batch");
        }
        if inputs.rows() != labels.len() {
            return dim_err("batch inputs and labels disagree in length");
        }
        Ok(Batch { inputs, labels })
    }

    pub fn gather(ds: &Dataset, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return usage_err("empty batch");
        }
        let cols = ds.inputs.cols();
        let mut inputs = Matrix::zeros(indices.len(), cols);
        let mut labels = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            inputs.row_mut(r).copy_from_slice(ds.inputs.row(i));
            labels.push(ds.labels[i]);
        }
        Batch::new(inputs, labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub hidden_width: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            learning_rate: 0.02,
            clip_norm: 5.0,
            local_epochs: 1,
            batch_size: 32,
            hidden_width: 256,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) {
            return usage_err("learning_rate must be >= 0");
        }
        if !(self.clip_norm > 0.0) {
            return usage_err("clip_norm must be > 0");
        }
        if self.batch_size == 0 {
            return usage_err("batch_size must be >= 1");
        }
        if self.hidden_width == 0 {
            return usage_err("hidden_width must be >= 1");
        }
        Ok(())
    }
}

/// Per-layer pre-activations and activations kept for backprop. The last
/// entry of `post` is the softmax output.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub pre: Vec<Matrix>,
    pub post: Vec<Matrix>,
}

impl ForwardPass {
    pub fn probs(&self) -> &Matrix {
        self.post.last().expect("forward pass has at least one layer")
    }
}

#[inline]
fn relu_in_place(m: &mut Matrix) {
    for v in m.as_mut_slice() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn add_bias_rows(m: &mut Matrix, bias: &[f64]) {
    for r in 0..m.rows() {
        for (v, &b) in m.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

pub(crate) fn softmax_rows_in_place(m: &mut Matrix) {
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Forward pass over a batch; hidden layers ReLU, output softmax.
pub fn forward(params: &ModelParams, inputs: &Matrix) -> Result<ForwardPass> {
    if inputs.cols() != params.layers[0].weights.rows() {
        return dim_err("input feature count does not match first-layer fan_in");
    }
    let n_layers = params.layers.len();
    let mut pre = Vec::with_capacity(n_layers);
    let mut post = Vec::with_capacity(n_layers);
    let mut act = inputs.clone();
    for (k, layer) in params.layers.iter().enumerate() {
        let mut z = act.matmul(&layer.weights)?;
        add_bias_rows(&mut z, &layer.bias);
        pre.push(z.clone());
        if k + 1 == n_layers {
            softmax_rows_in_place(&mut z);
        } else {
            relu_in_place(&mut z);
        }
        post.push(z.clone());
        act = z;
    }
    Ok(ForwardPass { pre, post })
}

/// Raw output logits (no softmax); enough for argmax prediction.
pub(crate) fn logits(params: &ModelParams, inputs: &Matrix) -> Result<Matrix> {
    if inputs.cols() != params.layers[0].weights.rows() {
        return dim_err("input feature count does not match first-layer fan_in");
    }
    let n_layers = params.layers.len();
    let mut act = inputs.clone();
    for (k, layer) in params.layers.iter().enumerate() {
        let mut z = act.matmul(&layer.weights)?;
        add_bias_rows(&mut z, &layer.bias);
        if k + 1 < n_layers {
            relu_in_place(&mut z);
        }
        act = z;
    }
    Ok(act)
}

/// Argmax with ties broken by the lowest class index.
#[inline]
pub(crate) fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Gradients of mean cross-entropy over the batch, for every weight and bias.
pub fn backward(params: &ModelParams, batch: &Batch, cache: &ForwardPass) -> Result<ModelParams> {
    let n_layers = params.layers.len();
    if cache.pre.len() != n_layers || cache.post.len() != n_layers {
        return dim_err("cache layer count does not match model");
    }
    let b = batch.inputs.rows();
    if cache.probs().rows() != b {
        return dim_err("cache batch size does not match batch");
    }
    let classes = params.num_classes();

    // dZ for the output layer: (softmax - onehot) / batch
    let mut dz = cache.probs().clone();
    for (r, &label) in batch.labels.iter().enumerate() {
        if label >= classes {
            return usage_err("label out of range");
        }
        let row = dz.row_mut(r);
        row[label] -= 1.0;
    }
    let inv_b = 1.0 / b as f64;
    for v in dz.as_mut_slice() {
        *v *= inv_b;
    }

    let mut grads: Vec<Layer> = (0..n_layers)
        .map(|k| Layer {
            weights: Matrix::zeros(params.layers[k].weights.rows(), params.layers[k].weights.cols()),
            bias: vec![0.0; params.layers[k].bias.len()],
        })
        .collect();

    for k in (0..n_layers).rev() {
        let input_act = if k == 0 { &batch.inputs } else { &cache.post[k - 1] };
        grads[k].weights = input_act.matmul_transpose_self(&dz)?;
        for r in 0..dz.rows() {
            for (gb, &v) in grads[k].bias.iter_mut().zip(dz.row(r)) {
                *gb += v;
            }
        }
        if k > 0 {
            let mut da = dz.matmul_transpose_other(&params.layers[k].weights)?;
            // ReLU gate from the pre-activation of layer k-1
            let z = &cache.pre[k - 1];
            for (v, &zv) in da.as_mut_slice().iter_mut().zip(z.as_slice()) {
                if zv <= 0.0 {
                    *v = 0.0;
                }
            }
            dz = da;
        }
    }

    Ok(ModelParams { layers: grads })
}

/// Mean cross-entropy of the batch; used by tests and the loss-descent check.
pub fn batch_loss(params: &ModelParams, batch: &Batch) -> Result<f64> {
    let pass = forward(params, &batch.inputs)?;
    let probs = pass.probs();
    let mut loss = 0.0;
    for (r, &label) in batch.labels.iter().enumerate() {
        loss -= libm::log(probs.get(r, label).max(1e-300));
    }
    Ok(loss / batch.labels.len() as f64)
}

fn step_in_place(params: &mut ModelParams, grads: &ModelParams, alpha: f64) -> Result<()> {
    if !params.same_shape(grads) {
        return dim_err("gradient shapes do not match parameters");
    }
    for (l, g) in params.layers.iter_mut().zip(&grads.layers) {
        for (w, &gw) in l.weights.as_mut_slice().iter_mut().zip(g.weights.as_slice()) {
            *w -= alpha * gw;
        }
        for (b, &gb) in l.bias.iter_mut().zip(&g.bias) {
            *b -= alpha * gb;
        }
    }
    Ok(())
}

/// One SGD step: every parameter moves by exactly `-alpha * grad`.
pub fn sgd_step(params: &ModelParams, grads: &ModelParams, alpha: f64) -> Result<ModelParams> {
    let mut updated = params.clone();
    step_in_place(&mut updated, grads, alpha)?;
    Ok(updated)
}

/// Global L2 clip over all parameters flattened: identity when the norm is
/// within `clip_norm`, otherwise a uniform rescale to exactly `clip_norm`.
pub fn clip_params(params: &ModelParams, clip_norm: f64) -> Result<ModelParams> {
    if !(clip_norm > 0.0) {
        return usage_err("clip_norm must be > 0");
    }
    let norm = params.l2_norm();
    // the tolerance absorbs rescale rounding, making the clip idempotent:
    // a just-clipped vector whose norm lands a few ulps above the bound
    // must not be rescaled again
    if norm <= clip_norm * (1.0 + 1e-12) {
        return Ok(params.clone());
    }
    let mut clipped = params.clone();
    clipped.scale_in_place(clip_norm / norm);
    Ok(clipped)
}

/// Fraction of samples whose argmax logit equals the label.
pub fn evaluate(params: &ModelParams, ds: &Dataset) -> Result<f64> {
    if ds.len() == 0 {
        return usage_err("cannot evaluate on an empty dataset");
    }
    let mut correct = 0usize;
    // Chunked so the logit buffers stay cache-sized.
    let chunk = 512;
    let n = ds.len();
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let indices: Vec<usize> = (start..end).collect();
        let batch = Batch::gather(ds, &indices)?;
        let out = logits(params, &batch.inputs)?;
        for (r, &label) in batch.labels.iter().enumerate() {
            if argmax_row(out.row(r)) == label {
                correct += 1;
            }
        }
        start = end;
    }
    Ok(correct as f64 / n as f64)
}

/// Local training: `local_epochs` of mini-batch SGD starting from `global`,
/// with per-epoch reshuffling driven only by `seed`, followed by a final
/// global L2 clip. Bit-identical output for identical inputs.
pub fn local_train(
    global: &ModelParams,
    ds: &Dataset,
    shard: &[usize],
    hp: &HyperParams,
    seed: u64,
) -> Result<ModelParams> {
    if shard.is_empty() {
        return usage_err("client shard is empty");
    }
    hp.validate()?;
    let mut params = global.clone();
    let mut order: Vec<usize> = shard.to_vec();
    for epoch in 0..hp.local_epochs {
        let mut rng = SeqRng::new(derive2(seed, SHUFFLE_STREAM, epoch as u64));
        order.copy_from_slice(shard);
        rng.shuffle(&mut order);
        for chunk in order.chunks(hp.batch_size) {
            let batch = Batch::gather(ds, chunk)?;
            let pass = forward(&params, &batch.inputs)?;
            let grads = backward(&params, &batch, &pass)?;
            step_in_place(&mut params, &grads, hp.learning_rate)?;
        }
    }
    clip_params(&params, hp.clip_norm)
}

/// Stream label separating the shuffle substream from other uses of a seed.
const SHUFFLE_STREAM: u64 = 0x53_48_46_4C;
