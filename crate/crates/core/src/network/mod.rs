//! Bidirectional LSTM regressor with Gaussian output heads.
//!
//! Layout: affine input layer, `num_layers` stacked (bi)LSTM layers, and four
//! affine heads on the top layer's output (pose μ/σ, acceleration μ/σ). The
//! σ heads go through SoftPlus plus a small floor.

mod frames;
mod linalg;
mod lstm;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

pub use frames::Frames;
pub use lstm::LstmParams;

use crate::error::{Error, Result};
use crate::kinematics::{JOINT_COUNT, SENSOR_COUNT};
use crate::normalization::{NormalizationScheme, Standardizer};
use linalg::{add_matvec, add_matvec_transposed, add_outer};
use lstm::{sigmoid, LstmCache};

/// Added to every SoftPlus output so σ stays strictly positive.
pub const SIGMA_FLOOR: f64 = 1e-6;
pub const POSE_DIM: usize = JOINT_COUNT * 9;
pub const ACC_DIM: usize = 3 * (SENSOR_COUNT - 1);

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Width of the dense input layer.
    pub dense_units: usize,
    /// Per direction, per layer.
    pub hidden_units: usize,
    pub num_layers: usize,
    pub pose_dim: usize,
    pub acc_dim: usize,
    pub bidirectional: bool,
    pub input_keep_prob: f64,
    pub use_acc_loss: bool,
    /// When false the acceleration block of every input is zeroed.
    pub use_acc_inputs: bool,
    pub scheme: NormalizationScheme,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: NormalizationScheme::default().input_dim(),
            dense_units: 512,
            hidden_units: 512,
            num_layers: 2,
            pose_dim: POSE_DIM,
            acc_dim: ACC_DIM,
            bidirectional: true,
            input_keep_prob: 0.8,
            use_acc_loss: true,
            use_acc_inputs: true,
            scheme: NormalizationScheme::default(),
        }
    }
}

impl ModelConfig {
    /// Small model used for quick experiments and tests.
    pub fn toy(hidden_units: usize) -> Self {
        Self {
            dense_units: hidden_units,
            hidden_units,
            ..Self::default()
        }
    }

    pub fn with_scheme(mut self, scheme: NormalizationScheme) -> Self {
        self.scheme = scheme;
        self.input_dim = scheme.input_dim();
        self
    }

    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    /// Width of each LSTM layer's (concatenated) output.
    pub fn layer_output_dim(&self) -> usize {
        self.hidden_units * self.directions()
    }

    /// Input columns holding accelerations.
    pub fn acc_input_range(&self) -> std::ops::Range<usize> {
        let n = 3 * self.scheme.encoded_sensors();
        self.input_dim - n..self.input_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.pose_dim != POSE_DIM {
            return Err(Error::invalid(format!(
                "pose_dim must be {POSE_DIM}, got {}",
                self.pose_dim
            )));
        }
        if self.acc_dim != ACC_DIM {
            return Err(Error::invalid(format!(
                "acc_dim must be {ACC_DIM}, got {}",
                self.acc_dim
            )));
        }
        if self.input_dim != self.scheme.input_dim() {
            return Err(Error::invalid(format!(
                "input_dim {} does not match scheme {} ({})",
                self.input_dim,
                self.scheme,
                self.scheme.input_dim()
            )));
        }
        if !(self.input_keep_prob > 0.0 && self.input_keep_prob <= 1.0) {
            return Err(Error::invalid(format!(
                "input_keep_prob {} not in (0, 1]",
                self.input_keep_prob
            )));
        }
        if self.hidden_units == 0 || self.dense_units == 0 || self.num_layers == 0 {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        Ok(())
    }
}

/// Affine map `y = W x + b`, `W` stored `out × in` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub input: usize,
    pub output: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            input,
            output,
            weight: vec![0.0; input * output],
            bias: vec![0.0; output],
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.bias);
        add_matvec(&self.weight, x, y);
    }

    fn apply_frames(&self, xs: &Frames) -> Frames {
        let mut out = Frames::zeros(xs.len(), self.output);
        for t in 0..xs.len() {
            self.apply(xs.row(t), out.row_mut(t));
        }
        out
    }

    /// Accumulates parameter gradients for `dy` at input `x` and adds the
    /// input gradient into `dx`.
    fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Linear, dx: &mut [f64]) {
        for (b, d) in grad.bias.iter_mut().zip(dy) {
            *b += d;
        }
        add_outer(&mut grad.weight, dy, x);
        add_matvec_transposed(&self.weight, dy, dx);
    }
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub dense: Linear,
    /// `layers[l][d]`: direction 0 runs forward in time, direction 1 backward.
    pub layers: Vec<Vec<LstmParams>>,
    pub pose_mu: Linear,
    pub pose_sigma: Linear,
    pub acc_mu: Linear,
    pub acc_sigma: Linear,
}

const DIRECTION_NAMES: [&str; 2] = ["fw", "bw"];

impl Params {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let h = cfg.hidden_units;
        let layers = (0..cfg.num_layers)
            .map(|l| {
                let input = if l == 0 {
                    cfg.dense_units
                } else {
                    cfg.layer_output_dim()
                };
                (0..cfg.directions())
                    .map(|_| LstmParams::zeros(input, h))
                    .collect()
            })
            .collect();
        let top = cfg.layer_output_dim();
        Self {
            dense: Linear::zeros(cfg.input_dim, cfg.dense_units),
            layers,
            pose_mu: Linear::zeros(top, cfg.pose_dim),
            pose_sigma: Linear::zeros(top, cfg.pose_dim),
            acc_mu: Linear::zeros(top, cfg.acc_dim),
            acc_sigma: Linear::zeros(top, cfg.acc_dim),
        }
    }

    /// Uniform ±1/√fan_in for input-side weights, orthogonal recurrent
    /// blocks, forget-gate bias 1, zero elsewhere.
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut p = Self::zeros(cfg);
        fill_uniform(&mut p.dense.weight, p.dense.input, rng);
        for layer in &mut p.layers {
            for cell in layer.iter_mut() {
                let h = cell.hidden;
                fill_uniform(&mut cell.w_ih, cell.input, rng);
                for gate in 0..4 {
                    let q = random_orthogonal(h, rng);
                    for r in 0..h {
                        for c in 0..h {
                            cell.w_hh[(gate * h + r) * h + c] = q[(r, c)];
                        }
                    }
                }
                cell.bias[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
            }
        }
        for head in [
            &mut p.pose_mu,
            &mut p.pose_sigma,
            &mut p.acc_mu,
            &mut p.acc_sigma,
        ] {
            fill_uniform(&mut head.weight, head.input, rng);
        }
        Ok(p)
    }

    /// Checks every tensor shape against `cfg`.
    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<()> {
        let expected = Self::zeros(cfg);
        let a = self.tensors();
        let b = expected.tensors();
        if a.len() != b.len()
            || a.iter()
                .zip(&b)
                .any(|(x, y)| x.0 != y.0 || x.1 != y.1 || x.2.len() != y.2.len())
        {
            return Err(Error::invalid(
                "parameter shapes do not match the model configuration",
            ));
        }
        Ok(())
    }

    /// `(name, dims, data)` for every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        push_linear(&mut out, "dense", &self.dense);
        for (l, layer) in self.layers.iter().enumerate() {
            for (d, cell) in layer.iter().enumerate() {
                let prefix = format!("lstm.{l}.{}", DIRECTION_NAMES[d]);
                let h4 = 4 * cell.hidden;
                out.push((
                    format!("{prefix}.w_ih"),
                    vec![h4, cell.input],
                    cell.w_ih.as_slice(),
                ));
                out.push((
                    format!("{prefix}.w_hh"),
                    vec![h4, cell.hidden],
                    cell.w_hh.as_slice(),
                ));
                out.push((format!("{prefix}.bias"), vec![h4], cell.bias.as_slice()));
            }
        }
        push_linear(&mut out, "pose_mu", &self.pose_mu);
        push_linear(&mut out, "pose_sigma", &self.pose_sigma);
        push_linear(&mut out, "acc_mu", &self.acc_mu);
        push_linear(&mut out, "acc_sigma", &self.acc_sigma);
        out
    }

    /// Mutable views of every tensor, in the order of [`Params::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = vec![&mut self.dense.weight, &mut self.dense.bias];
        for layer in &mut self.layers {
            for cell in layer.iter_mut() {
                out.push(&mut cell.w_ih);
                out.push(&mut cell.w_hh);
                out.push(&mut cell.bias);
            }
        }
        for head in [
            &mut self.pose_mu,
            &mut self.pose_sigma,
            &mut self.acc_mu,
            &mut self.acc_sigma,
        ] {
            out.push(&mut head.weight);
            out.push(&mut head.bias);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.2.iter().all(|v| v.is_finite()))
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Params, scale: f64) {
        let src: Vec<Vec<f64>> = other.tensors().into_iter().map(|t| t.2.to_vec()).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += scale * b;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Rebuilds a parameter set from named tensors (as produced by
    /// [`Params::tensors`]).
    pub fn from_tensors(
        cfg: &ModelConfig,
        tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
    ) -> Result<Self> {
        let mut p = Self::zeros(cfg);
        let layout: Vec<(String, Vec<usize>)> =
            p.tensors().into_iter().map(|t| (t.0, t.1)).collect();
        if layout.len() != tensors.len() {
            return Err(Error::invalid(format!(
                "expected {} tensors, found {}",
                layout.len(),
                tensors.len()
            )));
        }
        for ((slot, (name, dims)), (tn, td, data)) in
            p.tensors_mut().into_iter().zip(layout).zip(tensors)
        {
            if tn != name || td != dims {
                return Err(Error::invalid(format!(
                    "tensor {tn} {td:?} where {name} {dims:?} was expected"
                )));
            }
            if data.len() != slot.len() {
                return Err(Error::invalid(format!(
                    "tensor {tn} has {} values",
                    data.len()
                )));
            }
            *slot = data;
        }
        Ok(p)
    }
}

fn push_linear<'a>(out: &mut Vec<(String, Vec<usize>, &'a [f64])>, name: &str, l: &'a Linear) {
    out.push((
        format!("{name}.weight"),
        vec![l.output, l.input],
        l.weight.as_slice(),
    ));
    out.push((format!("{name}.bias"), vec![l.output], l.bias.as_slice()));
}

fn fill_uniform<R: Rng + ?Sized>(w: &mut [f64], fan_in: usize, rng: &mut R) {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    w.iter_mut().for_each(|v| *v = dist.sample(rng));
}

fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Sign fix so the result is Haar distributed.
    for c in 0..n {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

/// Per-timestep Gaussian parameters for pose and acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSequence {
    pub pose_mu: Frames,
    pub pose_sigma: Frames,
    pub acc_mu: Frames,
    pub acc_sigma: Frames,
}

impl GaussianSequence {
    pub fn len(&self) -> usize {
        self.pose_mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pose_mu.is_empty()
    }
}

/// Activations kept by a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Frames,
    dense_out: Frames,
    /// Concatenated hidden states of each LSTM layer.
    layer_outputs: Vec<Frames>,
    cells: Vec<Vec<LstmCache>>,
    pose_sigma_pre: Frames,
    acc_sigma_pre: Frames,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Inference,
    /// Keeps the activations needed by [`backward`].
    Training,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn prepare_inputs(cfg: &ModelConfig, inputs: &Frames, mask: Option<&Frames>) -> Result<Frames> {
    if inputs.is_empty() {
        return Err(Error::invalid("input sequence is empty"));
    }
    if inputs.dim() != cfg.input_dim {
        return Err(Error::invalid(format!(
            "inputs have {} columns, model expects {}",
            inputs.dim(),
            cfg.input_dim
        )));
    }
    if inputs.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite input"));
    }
    let mut x = inputs.clone();
    if let Some(mask) = mask {
        if mask.len() != x.len() || mask.dim() != x.dim() {
            return Err(Error::invalid("dropout mask shape does not match inputs"));
        }
        for (v, m) in x.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            *v *= m;
        }
    }
    if !cfg.use_acc_inputs {
        let range = cfg.acc_input_range();
        for t in 0..x.len() {
            x.row_mut(t)[range.clone()]
                .iter_mut()
                .for_each(|v| *v = 0.0);
        }
    }
    Ok(x)
}

/// Runs the network over a whole sequence of standardized inputs.
/// `mask` is an input-dropout mask (see [`dropout_mask`]); pass `None` at
/// inference time.
pub fn forward(
    params: &Params,
    cfg: &ModelConfig,
    inputs: &Frames,
    mask: Option<&Frames>,
    mode: Mode,
) -> Result<(GaussianSequence, Option<ForwardCache>)> {
    let x = prepare_inputs(cfg, inputs, mask)?;
    let len = x.len();
    let dense_out = params.dense.apply_frames(&x);

    let mut layer_outputs = Vec::with_capacity(params.layers.len());
    let mut cells = Vec::with_capacity(params.layers.len());
    for (l, layer) in params.layers.iter().enumerate() {
        let input = if l == 0 {
            &dense_out
        } else {
            &layer_outputs[l - 1]
        };
        let caches: Vec<LstmCache> = layer
            .iter()
            .enumerate()
            .map(|(d, cell)| lstm::forward(cell, input, d == 1))
            .collect();
        let h = cfg.hidden_units;
        let mut out = Frames::zeros(len, h * caches.len());
        for t in 0..len {
            let row = out.row_mut(t);
            for (d, c) in caches.iter().enumerate() {
                row[d * h..(d + 1) * h].copy_from_slice(c.hidden.row(t));
            }
        }
        layer_outputs.push(out);
        cells.push(caches);
    }

    let top = layer_outputs.last().expect("at least one layer");
    let pose_mu = params.pose_mu.apply_frames(top);
    let pose_sigma_pre = params.pose_sigma.apply_frames(top);
    let acc_mu = params.acc_mu.apply_frames(top);
    let acc_sigma_pre = params.acc_sigma.apply_frames(top);
    let activate = |pre: &Frames| {
        let data = pre
            .as_slice()
            .iter()
            .map(|&v| softplus(v) + SIGMA_FLOOR)
            .collect();
        Frames::from_flat(pre.dim(), data).expect("same shape")
    };
    let out = GaussianSequence {
        pose_mu,
        pose_sigma: activate(&pose_sigma_pre),
        acc_mu,
        acc_sigma: activate(&acc_sigma_pre),
    };
    let cache = (mode == Mode::Training).then_some(ForwardCache {
        inputs: x,
        dense_out,
        layer_outputs,
        cells,
        pose_sigma_pre,
        acc_sigma_pre,
    });
    Ok((out, cache))
}

/// Inference-mode forward pass.
pub fn predict(params: &Params, cfg: &ModelConfig, inputs: &Frames) -> Result<GaussianSequence> {
    Ok(forward(params, cfg, inputs, None, Mode::Inference)?.0)
}

fn gaussian_nll(y: &[f64], mu: &[f64], sigma: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for ((y, m), sd) in y.iter().zip(mu).zip(sigma) {
        if sd.is_nan() || *sd <= 0.0 {
            return Err(Error::InternalInvariant(format!("non-positive sigma {sd}")));
        }
        let z = (y - m) / sd;
        s += (2.0 * PI).ln() + 2.0 * sd.ln() + z * z;
    }
    Ok(0.5 * s)
}

fn check_targets(output: &GaussianSequence, pose: &Frames, acc: Option<&Frames>) -> Result<()> {
    let len = output.len();
    if pose.len() != len || pose.dim() != output.pose_mu.dim() {
        return Err(Error::invalid(format!(
            "pose targets {}×{} do not match output {}×{}",
            pose.len(),
            pose.dim(),
            len,
            output.pose_mu.dim()
        )));
    }
    if let Some(acc) = acc {
        if acc.len() != len || acc.dim() != output.acc_mu.dim() {
            return Err(Error::invalid(format!(
                "acceleration targets {}×{} do not match output {}×{}",
                acc.len(),
                acc.dim(),
                len,
                output.acc_mu.dim()
            )));
        }
    }
    Ok(())
}

/// Negative log-likelihood averaged over timesteps. The acceleration term is
/// included when `cfg.use_acc_loss` is set.
pub fn nll_loss(
    output: &GaussianSequence,
    pose_targets: &Frames,
    acc_targets: &Frames,
    cfg: &ModelConfig,
) -> Result<f64> {
    let acc = cfg.use_acc_loss.then_some(acc_targets);
    check_targets(output, pose_targets, acc)?;
    let mut total = 0.0;
    for t in 0..output.len() {
        total += gaussian_nll(
            pose_targets.row(t),
            output.pose_mu.row(t),
            output.pose_sigma.row(t),
        )?;
        if let Some(acc) = acc {
            total += gaussian_nll(acc.row(t), output.acc_mu.row(t), output.acc_sigma.row(t))?;
        }
    }
    Ok(total / output.len() as f64)
}

/// Gradients of the head pre-activations, scaled by `scale / T`.
fn head_gradients(
    y: &[f64],
    mu: &[f64],
    sigma: &[f64],
    sigma_pre: &[f64],
    scale: f64,
    d_mu: &mut [f64],
    d_pre: &mut [f64],
) {
    for k in 0..y.len() {
        let s = sigma[k];
        let r = mu[k] - y[k];
        d_mu[k] = scale * r / (s * s);
        let d_sigma = scale * (1.0 / s - r * r / (s * s * s));
        d_pre[k] = d_sigma * sigmoid(sigma_pre[k]);
    }
}

/// Exact gradient of `loss_scale · nll_loss` with respect to every parameter.
pub fn backward(
    params: &Params,
    cfg: &ModelConfig,
    output: &GaussianSequence,
    cache: Option<&ForwardCache>,
    pose_targets: &Frames,
    acc_targets: &Frames,
    loss_scale: f64,
) -> Result<Params> {
    let cache = cache.ok_or_else(|| {
        Error::InvalidState("backward needs a training-mode forward cache".into())
    })?;
    let acc = cfg.use_acc_loss.then_some(acc_targets);
    check_targets(output, pose_targets, acc)?;
    let len = output.len();
    let scale = loss_scale / len as f64;
    let mut grad = Params::zeros(cfg);

    let top_index = params.layers.len() - 1;
    let top = &cache.layer_outputs[top_index];
    let mut d_layer = Frames::zeros(len, top.dim());
    let mut d_mu = vec![0.0; cfg.pose_dim];
    let mut d_pre = vec![0.0; cfg.pose_dim];
    let mut da_mu = vec![0.0; cfg.acc_dim];
    let mut da_pre = vec![0.0; cfg.acc_dim];
    for t in 0..len {
        let x = top.row(t);
        head_gradients(
            pose_targets.row(t),
            output.pose_mu.row(t),
            output.pose_sigma.row(t),
            cache.pose_sigma_pre.row(t),
            scale,
            &mut d_mu,
            &mut d_pre,
        );
        let dx = d_layer.row_mut(t);
        params.pose_mu.backward(x, &d_mu, &mut grad.pose_mu, dx);
        params
            .pose_sigma
            .backward(x, &d_pre, &mut grad.pose_sigma, dx);
        if let Some(acc) = acc {
            head_gradients(
                acc.row(t),
                output.acc_mu.row(t),
                output.acc_sigma.row(t),
                cache.acc_sigma_pre.row(t),
                scale,
                &mut da_mu,
                &mut da_pre,
            );
            params.acc_mu.backward(x, &da_mu, &mut grad.acc_mu, dx);
            params
                .acc_sigma
                .backward(x, &da_pre, &mut grad.acc_sigma, dx);
        }
    }

    let h = cfg.hidden_units;
    for l in (0..params.layers.len()).rev() {
        let input = if l == 0 {
            &cache.dense_out
        } else {
            &cache.layer_outputs[l - 1]
        };
        let mut d_input = Frames::zeros(len, input.dim());
        for (d, cell) in params.layers[l].iter().enumerate() {
            let mut d_hidden = Frames::zeros(len, h);
            for t in 0..len {
                d_hidden
                    .row_mut(t)
                    .copy_from_slice(&d_layer.row(t)[d * h..(d + 1) * h]);
            }
            lstm::backward(
                cell,
                input,
                &cache.cells[l][d],
                &d_hidden,
                &mut grad.layers[l][d],
                &mut d_input,
            );
        }
        d_layer = d_input;
    }

    let mut scratch = vec![0.0; cfg.input_dim];
    for t in 0..len {
        params.dense.backward(
            cache.inputs.row(t),
            d_layer.row(t),
            &mut grad.dense,
            &mut scratch,
        );
    }
    Ok(grad)
}

/// Inverted-dropout mask: each entry is `1/keep_prob` with probability
/// `keep_prob`, else 0. Entries are drawn row by row.
pub fn dropout_mask<R: Rng + ?Sized>(
    len: usize,
    dim: usize,
    keep_prob: f64,
    rng: &mut R,
) -> Frames {
    if keep_prob >= 1.0 {
        return Frames::from_flat(dim.max(1), vec![1.0; len * dim.max(1)]).expect("shape");
    }
    let scale = 1.0 / keep_prob;
    let data = (0..len * dim)
        .map(|_| {
            if rng.random::<f64>() < keep_prob {
                scale
            } else {
                0.0
            }
        })
        .collect();
    Frames::from_flat(dim, data).expect("shape")
}

/// Applies a fresh dropout mask to `x`, returning the masked sequence and
/// the mask.
pub fn apply_input_dropout<R: Rng + ?Sized>(
    x: &Frames,
    keep_prob: f64,
    rng: &mut R,
) -> Result<(Frames, Frames)> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::invalid(format!(
            "keep probability {keep_prob} not in (0, 1]"
        )));
    }
    if keep_prob == 1.0 {
        let ones = Frames::from_flat(x.dim(), vec![1.0; x.as_slice().len()])?;
        return Ok((x.clone(), ones));
    }
    let mask = dropout_mask(x.len(), x.dim(), keep_prob, rng);
    let data = x
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .map(|(a, m)| a * m)
        .collect();
    Ok((Frames::from_flat(x.dim(), data)?, mask))
}

/// A trained model with the statistics its inputs and outputs were
/// standardized with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub standardizer: Standardizer,
    pub params: Params,
}

impl Checkpoint {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.params.check_shapes(&self.config)?;
        let s = &self.standardizer;
        if s.input.dim() != self.config.input_dim
            || s.target.dim() != self.config.pose_dim
            || s.acc.dim() != self.config.acc_dim
        {
            return Err(Error::invalid(
                "standardizer dimensions do not match the model",
            ));
        }
        Ok(())
    }
}
