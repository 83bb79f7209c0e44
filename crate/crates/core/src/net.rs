//! A two-hidden-layer rectifier MLP with a classification head and a
//! projection head, hand-written forward/backward passes, and SGD with
//! momentum and step decay.
//!
//! Parameters live in one flat `Vec<f64>` laid out in declaration order
//! (`W1, b1, W2, b2, Wc, bc, Wp, bp`, matrices row-major), so gradients share
//! the same vector space and inner products between them are plain dot
//! products.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::par;
use crate::sampling::stream;
use crate::{HrpError, Result};

/// Network shape: `D -> H -> H` trunk, `H -> C` classifier, `H -> P` projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub proj: usize,
}

impl Default for Arch {
    fn default() -> Self {
        Arch {
            input_dim: 2,
            hidden: 64,
            classes: 4,
            proj: 16,
        }
    }
}

#[derive(Debug, Clone)]
struct Layout {
    w1: Range<usize>,
    b1: Range<usize>,
    w2: Range<usize>,
    b2: Range<usize>,
    wc: Range<usize>,
    bc: Range<usize>,
    wp: Range<usize>,
    bp: Range<usize>,
}

impl Arch {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.classes < 2 || self.proj == 0 {
            return Err(HrpError::Config(format!("invalid architecture {self:?}")));
        }
        Ok(())
    }

    fn layout(&self) -> Layout {
        let (d, h, c, p) = (self.input_dim, self.hidden, self.classes, self.proj);
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        Layout {
            w1: take(h * d),
            b1: take(h),
            w2: take(h * h),
            b2: take(h),
            wc: take(c * h),
            bc: take(c),
            wp: take(p * h),
            bp: take(p),
        }
    }

    pub fn num_params(&self) -> usize {
        self.layout().bp.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Arch,
    pub data: Vec<f64>,
}

/// A direction in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn zeros(len: usize) -> Self {
        GradientVector(vec![0.0; len])
    }

    pub fn dot(&self, other: &GradientVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.0.iter_mut().for_each(|v| *v *= s);
        self
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, other: &GradientVector, s: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Add for GradientVector {
    type Output = GradientVector;

    fn add(mut self, rhs: GradientVector) -> GradientVector {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

/// Inner product with four interleaved partial sums.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (ca, cb) = (a[..n].chunks_exact(4), b[..n].chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    let mut acc = [0.0; 4];
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Whether the network runs in training or evaluation mode. The architecture
/// has no state that differs between the two; the flag keeps the contract of
/// meta-loss evaluation explicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Logits, raw embedding, and the activations backward needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    pub embedding: Vec<f64>,
    pre1: Vec<f64>,
    h1: Vec<f64>,
    pre2: Vec<f64>,
    h2: Vec<f64>,
}

impl ForwardOutput {
    pub fn features(&self) -> &[f64] {
        &self.h2
    }
}

/// He-normal weights (`std = sqrt(2 / fan_in)`), zero biases.
pub fn init_params(arch: Arch, seed: u64) -> ModelParams {
    let lay = arch.layout();
    let mut data = vec![0.0; arch.num_params()];
    let mut rng = stream(seed, &[0x1417]);
    let blocks = [
        (lay.w1, arch.input_dim),
        (lay.w2, arch.hidden),
        (lay.wc, arch.hidden),
        (lay.wp, arch.hidden),
    ];
    for (range, fan_in) in blocks {
        let scale = (2.0 / fan_in as f64).sqrt();
        for v in &mut data[range] {
            *v = scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
    ModelParams { arch, data }
}

impl ModelParams {
    pub fn zeros(arch: Arch) -> Self {
        ModelParams {
            arch,
            data: vec![0.0; arch.num_params()],
        }
    }

    pub fn w1(&self) -> &[f64] {
        &self.data[self.arch.layout().w1]
    }
    pub fn b1(&self) -> &[f64] {
        &self.data[self.arch.layout().b1]
    }
    pub fn w2(&self) -> &[f64] {
        &self.data[self.arch.layout().w2]
    }
    pub fn b2(&self) -> &[f64] {
        &self.data[self.arch.layout().b2]
    }
    pub fn wc(&self) -> &[f64] {
        &self.data[self.arch.layout().wc]
    }
    pub fn bc(&self) -> &[f64] {
        &self.data[self.arch.layout().bc]
    }
    pub fn wp(&self) -> &[f64] {
        &self.data[self.arch.layout().wp]
    }
    pub fn bp(&self) -> &[f64] {
        &self.data[self.arch.layout().bp]
    }

    /// Mutable views in declaration order: `(W1, b1, W2, b2, Wc, bc, Wp, bp)`.
    #[allow(clippy::type_complexity)]
    pub fn blocks_mut(
        &mut self,
    ) -> (
        &mut [f64],
        &mut [f64],
        &mut [f64],
        &mut [f64],
        &mut [f64],
        &mut [f64],
        &mut [f64],
        &mut [f64],
    ) {
        let lay = self.arch.layout();
        let (w1, rest) = self.data.split_at_mut(lay.w1.end);
        let (b1, rest) = rest.split_at_mut(lay.b1.len());
        let (w2, rest) = rest.split_at_mut(lay.w2.len());
        let (b2, rest) = rest.split_at_mut(lay.b2.len());
        let (wc, rest) = rest.split_at_mut(lay.wc.len());
        let (bc, rest) = rest.split_at_mut(lay.bc.len());
        let (wp, bp) = rest.split_at_mut(lay.wp.len());
        (w1, b1, w2, b2, wc, bc, wp, bp)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Parameters displaced by `step * direction`.
    pub fn offset(&self, direction: &GradientVector, step: f64) -> ModelParams {
        let data = self
            .data
            .iter()
            .zip(&direction.0)
            .map(|(p, d)| p + step * d)
            .collect();
        ModelParams {
            arch: self.arch,
            data,
        }
    }
}

/// `out = W v + b` for a row-major `W` with `out.len()` rows.
fn affine(w: &[f64], b: &[f64], v: &[f64]) -> Vec<f64> {
    let cols = v.len();
    b.iter()
        .enumerate()
        .map(|(r, bias)| bias + dot(&w[r * cols..(r + 1) * cols], v))
        .collect()
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|z| z.max(0.0)).collect()
}

pub fn forward(params: &ModelParams, x: &[f64], _mode: Mode) -> Result<ForwardOutput> {
    if x.len() != params.arch.input_dim {
        return Err(HrpError::Contract(format!(
            "input has dimension {}, network expects {}",
            x.len(),
            params.arch.input_dim
        )));
    }
    Ok(forward_unchecked(params, x))
}

fn forward_unchecked(params: &ModelParams, x: &[f64]) -> ForwardOutput {
    let pre1 = affine(params.w1(), params.b1(), x);
    let h1 = relu(&pre1);
    let pre2 = affine(params.w2(), params.b2(), &h1);
    let h2 = relu(&pre2);
    ForwardOutput {
        logits: affine(params.wc(), params.bc(), &h2),
        embedding: affine(params.wp(), params.bp(), &h2),
        pre1,
        h1,
        pre2,
        h2,
    }
}

pub(crate) fn check_inputs(params: &ModelParams, inputs: &[Vec<f64>]) -> Result<()> {
    let d = params.arch.input_dim;
    if let Some(bad) = inputs.iter().find(|x| x.len() != d) {
        return Err(HrpError::Contract(format!(
            "input has dimension {}, network expects {d}",
            bad.len()
        )));
    }
    Ok(())
}

/// Forward pass over a batch, in input order.
pub fn forward_batch(params: &ModelParams, inputs: &[Vec<f64>], mode: Mode) -> Result<Vec<ForwardOutput>> {
    let _ = mode;
    check_inputs(params, inputs)?;
    Ok(par::map_slice(inputs, |x| forward_unchecked(params, x)))
}

/// Receives backward-pass contributions in parameter-vector coordinates.
trait GradSink {
    /// `grad[offset + k] += g * v[k]`.
    fn add_scaled_row(&mut self, offset: usize, g: f64, v: &[f64]);
    /// `grad[offset + k] += v[k]`.
    fn add_row(&mut self, offset: usize, v: &[f64]);
}

impl GradSink for [f64] {
    fn add_scaled_row(&mut self, offset: usize, g: f64, v: &[f64]) {
        for (t, x) in self[offset..offset + v.len()].iter_mut().zip(v) {
            *t += g * x;
        }
    }
    fn add_row(&mut self, offset: usize, v: &[f64]) {
        for (t, x) in self[offset..offset + v.len()].iter_mut().zip(v) {
            *t += x;
        }
    }
}

/// Projects contributions onto a fixed direction instead of storing them.
struct DotSink<'a> {
    direction: &'a [f64],
    acc: f64,
}

impl GradSink for DotSink<'_> {
    fn add_scaled_row(&mut self, offset: usize, g: f64, v: &[f64]) {
        self.acc += g * dot(&self.direction[offset..offset + v.len()], v);
    }
    fn add_row(&mut self, offset: usize, v: &[f64]) {
        self.acc += dot(&self.direction[offset..offset + v.len()], v);
    }
}

/// Accumulates the parameter gradient of a scalar loss into `grad`, given
/// the loss gradient with respect to the logits and (optionally) the raw
/// embedding of one sample.
pub fn backward_into(
    params: &ModelParams,
    x: &[f64],
    out: &ForwardOutput,
    dlogits: &[f64],
    dembedding: Option<&[f64]>,
    grad: &mut [f64],
) {
    backward_sink(params, x, out, dlogits, dembedding, grad);
}

fn backward_sink<S: GradSink + ?Sized>(
    params: &ModelParams,
    x: &[f64],
    out: &ForwardOutput,
    dlogits: &[f64],
    dembedding: Option<&[f64]>,
    sink: &mut S,
) {
    let arch = params.arch;
    let (d, h) = (arch.input_dim, arch.hidden);
    let lay = arch.layout();

    let mut dh2 = vec![0.0; h];
    let mut head = |w: &[f64], w_at: usize, b_at: usize, upstream: &[f64], sink: &mut S| {
        for (c, &g) in upstream.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (acc, wk) in dh2.iter_mut().zip(&w[c * h..(c + 1) * h]) {
                *acc += wk * g;
            }
            sink.add_scaled_row(w_at + c * h, g, &out.h2);
        }
        sink.add_row(b_at, upstream);
    };
    head(params.wc(), lay.wc.start, lay.bc.start, dlogits, sink);
    if let Some(de) = dembedding {
        head(params.wp(), lay.wp.start, lay.bp.start, de, sink);
    }

    let dpre2: Vec<f64> = dh2
        .iter()
        .zip(&out.pre2)
        .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
        .collect();
    let mut dh1 = vec![0.0; h];
    let w2 = params.w2();
    for (r, &g) in dpre2.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (acc, wk) in dh1.iter_mut().zip(&w2[r * h..(r + 1) * h]) {
            *acc += wk * g;
        }
        sink.add_scaled_row(lay.w2.start + r * h, g, &out.h1);
    }
    sink.add_row(lay.b2.start, &dpre2);

    let mut db1 = vec![0.0; h];
    for r in 0..h {
        if out.pre1[r] <= 0.0 || dh1[r] == 0.0 {
            continue;
        }
        db1[r] = dh1[r];
        sink.add_scaled_row(lay.w1.start + r * d, dh1[r], x);
    }
    sink.add_row(lay.b1.start, &db1);
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|z| (z - m).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|z| (z - lse).exp()).collect()
}

/// `-sum_c target_c * log softmax(logits)_c`, stabilized by log-sum-exp.
pub fn ce_loss(logits: &[f64], target: &[f64]) -> f64 {
    let lse = log_sum_exp(logits);
    target
        .iter()
        .zip(logits)
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, z)| -t * (z - lse))
        .sum()
}

/// Gradient of [`ce_loss`] with respect to the logits: `softmax - target`
/// (valid for targets summing to one).
pub fn ce_dlogits(logits: &[f64], target: &[f64]) -> Vec<f64> {
    softmax(logits).iter().zip(target).map(|(p, t)| p - t).collect()
}

/// `sum_i coeff_i * CE(f(x_i), target_i)` and its parameter gradient.
pub fn weighted_ce(
    params: &ModelParams,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    coeffs: &[f64],
) -> Result<(f64, GradientVector)> {
    check_inputs(params, inputs)?;
    if targets.len() != inputs.len() || coeffs.len() != inputs.len() {
        return Err(HrpError::Contract(format!(
            "batch of {} inputs with {} targets and {} weights",
            inputs.len(),
            targets.len(),
            coeffs.len()
        )));
    }
    let len = params.data.len();
    // slot `len` carries the loss value alongside the gradient
    let mut acc = par::chunked_sum(inputs.len(), len + 1, |i, acc| {
        if coeffs[i] == 0.0 {
            return;
        }
        let out = forward_unchecked(params, &inputs[i]);
        acc[len] += coeffs[i] * ce_loss(&out.logits, &targets[i]);
        let dl: Vec<f64> = ce_dlogits(&out.logits, &targets[i])
            .into_iter()
            .map(|g| coeffs[i] * g)
            .collect();
        backward_into(params, &inputs[i], &out, &dl, None, &mut acc[..len]);
    });
    let value = acc.pop().expect("value slot");
    Ok((value, GradientVector(acc)))
}

/// Gradient of `(1/|B|) sum_i weight_i * CE_i`.
pub fn grad_batch(
    params: &ModelParams,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    weights: &[f64],
) -> Result<GradientVector> {
    if inputs.is_empty() {
        return Ok(GradientVector::zeros(params.data.len()));
    }
    let inv = 1.0 / inputs.len() as f64;
    let coeffs: Vec<f64> = weights.iter().map(|w| w * inv).collect();
    Ok(weighted_ce(params, inputs, targets, &coeffs)?.1)
}

/// Per-sample gradients `∇CE(f(x_i), given_i) / |B|` and
/// `∇CE(f(x_i), pseudo_i) / |B|`, sharing one forward pass per sample.
pub fn per_sample_grads(
    params: &ModelParams,
    inputs: &[Vec<f64>],
    given: &[Vec<f64>],
    pseudo: &[Vec<f64>],
) -> Result<(Vec<GradientVector>, Vec<GradientVector>)> {
    check_inputs(params, inputs)?;
    if given.len() != inputs.len() || pseudo.len() != inputs.len() {
        return Err(HrpError::Contract("target sequences must match the batch length".into()));
    }
    let inv = 1.0 / inputs.len() as f64;
    let len = params.data.len();
    let pairs = par::map_range(inputs.len(), |i| {
        let out = forward_unchecked(params, &inputs[i]);
        let one = |target: &[f64]| {
            let dl: Vec<f64> = ce_dlogits(&out.logits, target).iter().map(|g| g * inv).collect();
            let mut g = vec![0.0; len];
            backward_into(params, &inputs[i], &out, &dl, None, &mut g);
            GradientVector(g)
        };
        (one(&given[i]), one(&pseudo[i]))
    });
    Ok(pairs.into_iter().unzip())
}

/// Projections `<direction, g_i>` of the per-sample gradients returned by
/// [`per_sample_grads`], computed without materializing them.
pub fn per_sample_projections(
    params: &ModelParams,
    inputs: &[Vec<f64>],
    given: &[Vec<f64>],
    pseudo: &[Vec<f64>],
    direction: &GradientVector,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_inputs(params, inputs)?;
    if given.len() != inputs.len() || pseudo.len() != inputs.len() {
        return Err(HrpError::Contract("target sequences must match the batch length".into()));
    }
    if direction.0.len() != params.data.len() {
        return Err(HrpError::Contract("projection direction has the wrong length".into()));
    }
    let inv = 1.0 / inputs.len() as f64;
    let pairs = par::map_range(inputs.len(), |i| {
        let out = forward_unchecked(params, &inputs[i]);
        let one = |target: &[f64]| {
            let dl: Vec<f64> = ce_dlogits(&out.logits, target).iter().map(|g| g * inv).collect();
            let mut sink = DotSink { direction: &direction.0, acc: 0.0 };
            backward_sink(params, &inputs[i], &out, &dl, None, &mut sink);
            sink.acc
        };
        (one(&given[i]), one(&pseudo[i]))
    });
    Ok(pairs.into_iter().unzip())
}

/// Parameter gradient of a loss that depends on the raw embeddings only.
pub fn embedding_backward(
    params: &ModelParams,
    inputs: &[Vec<f64>],
    d_embeddings: &[Vec<f64>],
) -> Result<GradientVector> {
    check_inputs(params, inputs)?;
    let zeros = vec![0.0; params.arch.classes];
    let grad = par::chunked_sum(inputs.len(), params.data.len(), |i, acc| {
        if d_embeddings[i].iter().all(|g| *g == 0.0) {
            return;
        }
        let out = forward_unchecked(params, &inputs[i]);
        backward_into(params, &inputs[i], &out, &zeros, Some(&d_embeddings[i]), acc);
    });
    Ok(GradientVector(grad))
}

/// `v / (|v| + 1e-12)`; the flag is true when `v` is the zero vector.
pub fn l2_normalize(v: &[f64]) -> (Vec<f64>, bool) {
    let n = dot(v, v).sqrt();
    if n == 0.0 {
        return (vec![0.0; v.len()], true);
    }
    let s = 1.0 / (n + 1e-12);
    (v.iter().map(|x| x * s).collect(), false)
}

/// Pulls a gradient on `z = v / (|v| + 1e-12)` back to `v`.
pub fn l2_normalize_backward(v: &[f64], dz: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    if n == 0.0 {
        return vec![0.0; v.len()];
    }
    let denom = n + 1e-12;
    let proj = dot(v, dz) / (n * denom * denom);
    v.iter()
        .zip(dz)
        .map(|(x, g)| g / denom - x * proj)
        .collect()
}

/// Step-decay learning-rate schedule and SGD hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub base_lr: f64,
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Schedule {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let k = self.decay_epochs.iter().filter(|&&e| epoch >= e).count();
        self.base_lr * self.decay_factor.powi(k as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub velocity: Vec<f64>,
    pub step: u64,
    pub epoch: usize,
    pub schedule: Schedule,
}

impl OptState {
    pub fn new(arch: Arch, schedule: Schedule) -> Self {
        OptState {
            velocity: vec![0.0; arch.num_params()],
            step: 0,
            epoch: 0,
            schedule,
        }
    }

    pub fn lr(&self) -> f64 {
        self.schedule.lr_at(self.epoch)
    }
}

/// `v <- mu v + g + wd theta;  theta <- theta - lr(epoch) v`.
pub fn sgd_step(
    params: &ModelParams,
    grad: &GradientVector,
    opt: &OptState,
) -> Result<(ModelParams, OptState)> {
    if grad.0.len() != params.data.len() || opt.velocity.len() != params.data.len() {
        return Err(HrpError::Contract("gradient/optimizer shape mismatch".into()));
    }
    let s = &opt.schedule;
    let lr = opt.lr();
    let mut next_v = Vec::with_capacity(params.data.len());
    let mut next_p = Vec::with_capacity(params.data.len());
    for ((p, g), v) in params.data.iter().zip(&grad.0).zip(&opt.velocity) {
        let nv = s.momentum * v + g + s.weight_decay * p;
        next_v.push(nv);
        next_p.push(p - lr * nv);
    }
    Ok((
        ModelParams {
            arch: params.arch,
            data: next_p,
        },
        OptState {
            velocity: next_v,
            step: opt.step + 1,
            epoch: opt.epoch,
            schedule: opt.schedule.clone(),
        },
    ))
}

const CKPT_MAGIC: &[u8; 8] = b"HRPPARAM";
const CKPT_VERSION: u32 = 1;

impl ModelParams {
    /// Versioned little-endian checkpoint: magic, version, `D H C P` as u32,
    /// then every parameter as f64 in declaration order.
    pub fn to_checkpoint(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(28 + 8 * self.data.len());
        out.extend_from_slice(CKPT_MAGIC);
        out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
        let a = self.arch;
        for dim in [a.input_dim, a.hidden, a.classes, a.proj] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
        let bad = |m: &str| HrpError::Contract(format!("checkpoint: {m}"));
        if bytes.len() < 28 || &bytes[..8] != CKPT_MAGIC {
            return Err(bad("missing magic header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
        if word(0) != CKPT_VERSION {
            return Err(bad(&format!("unsupported version {}", word(0))));
        }
        let arch = Arch {
            input_dim: word(1) as usize,
            hidden: word(2) as usize,
            classes: word(3) as usize,
            proj: word(4) as usize,
        };
        arch.validate()?;
        let body = &bytes[28..];
        if body.len() != 8 * arch.num_params() {
            return Err(bad("payload length does not match architecture"));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ModelParams { arch, data })
    }
}

/// One-hot probability vector.
pub fn one_hot(class: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[class] = 1.0;
    v
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
