//! Disentangled per-sample reliabilities from bilevel meta-gradients.
//!
//! Each training sample carries two loss weights, `eps1` on its given label
//! and `eps2` on its pseudo-label. One virtual SGD step on the weighted
//! batch loss gives `theta_hat(eps) = theta - lr * grad L_train(theta, eps)`,
//! and the meta loss on the clean meta set is evaluated at `theta_hat`.
//! Because `theta_hat` is affine in `eps`, the derivative at `eps = 0` is
//! exactly
//!
//! ```text
//! dL_meta/d eps_{k,i} = -lr * <grad L_meta(theta), g_{k,i}>
//! ```
//!
//! where `g_{k,i}` is the per-sample gradient of the `k`-th loss term. The
//! production path ([`meta_gradients_closed`]) uses this identity; the
//! finite-difference path ([`meta_gradients_fd`]) performs the virtual step
//! literally and is kept as an oracle.

use serde::{Deserialize, Serialize};

use crate::dataset::MetaSet;
use crate::net::{self, ModelParams, Mode};
use crate::{par, HrpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    /// Step size of the virtual update; the trainer passes the current
    /// learning rate of the network being updated.
    pub eta_inner: f64,
    /// Guard added to the batch mass in the normalization.
    pub xi: f64,
    /// Perturbation size of the finite-difference oracle.
    pub fd_step: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            eta_inner: 0.05,
            xi: 1e-10,
            fd_step: 1e-4,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_inner >= 0.0 && self.eta_inner.is_finite()) {
            return Err(HrpError::Config(format!("eta_inner must be >= 0, got {}", self.eta_inner)));
        }
        if !(self.xi > 0.0) {
            return Err(HrpError::Config(format!("xi must be > 0, got {}", self.xi)));
        }
        if !(self.fd_step > 0.0) {
            return Err(HrpError::Config(format!("fd_step must be > 0, got {}", self.fd_step)));
        }
        Ok(())
    }
}

/// Reliabilities for one mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityBatch {
    /// Given-label reliability.
    pub alpha: Vec<f64>,
    /// Pseudo-label reliability.
    pub beta: Vec<f64>,
    /// Truncated negative meta-gradients before normalization.
    pub raw1: Vec<f64>,
    pub raw2: Vec<f64>,
    pub ids: Vec<usize>,
}

impl ReliabilityBatch {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Sum of the truncated raws.
    pub fn raw_mass(&self) -> f64 {
        self.raw1.iter().chain(&self.raw2).sum()
    }

    /// Replaces both reliabilities by their per-sample average, which is the
    /// single-coefficient (coupled) variant used for ablations.
    pub fn coupled(mut self) -> Self {
        for (a, b) in self.alpha.iter_mut().zip(self.beta.iter_mut()) {
            let m = 0.5 * (*a + *b);
            *a = m;
            *b = m;
        }
        self
    }
}

fn meta_inputs(meta: &MetaSet, classes: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    meta.samples
        .iter()
        .map(|s| (s.x.clone(), net::one_hot(s.y_true, classes)))
        .unzip()
}

/// Mean cross-entropy of `params` on the meta set, in evaluation mode.
pub fn meta_loss(params: &ModelParams, meta: &MetaSet) -> Result<f64> {
    if meta.is_empty() {
        return Err(HrpError::Config("meta set is empty".into()));
    }
    let (xs, ts) = meta_inputs(meta, params.arch.classes);
    let outs = net::forward_batch(params, &xs, Mode::Eval)?;
    let total = par::chunked_sum_scalar(outs.len(), |i| net::ce_loss(&outs[i].logits, &ts[i]));
    Ok(total / outs.len() as f64)
}

fn check_batch(
    inputs: &[Vec<f64>],
    given: &[Vec<f64>],
    pseudo: &[Vec<f64>],
    meta: &MetaSet,
) -> Result<()> {
    if meta.is_empty() {
        return Err(HrpError::Config("meta set is empty; reliability estimation needs clean samples".into()));
    }
    if given.len() != inputs.len() || pseudo.len() != inputs.len() {
        return Err(HrpError::Contract("target sequences must match the batch length".into()));
    }
    Ok(())
}

/// Exact meta-gradients `(dL_meta/d eps1_i, dL_meta/d eps2_i)` at `eps = 0`.
pub fn meta_gradients_closed(
    params: &ModelParams,
    inputs: &[Vec<f64>],
    given: &[Vec<f64>],
    pseudo: &[Vec<f64>],
    meta: &MetaSet,
    cfg: &MetaConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_batch(inputs, given, pseudo, meta)?;
    let (mx, mt) = meta_inputs(meta, params.arch.classes);
    let meta_grad = net::grad_batch(params, &mx, &mt, &vec![1.0; mx.len()])?;
    let (p1, p2) = net::per_sample_projections(params, inputs, given, pseudo, &meta_grad)?;
    let scale = |p: Vec<f64>| -> Vec<f64> { p.into_iter().map(|v| -cfg.eta_inner * v).collect() };
    Ok((scale(p1), scale(p2)))
}

/// Finite-difference meta-gradients through a literal one-step virtual update.
///
/// For every sample `i` and loss term `k`, the weight `eps_{k,i}` is set to
/// `+h` and `-h` (all other weights zero), plain SGD produces
/// `theta_hat = theta - eta_inner * grad L_train(theta, eps)`, and the meta
/// loss at `theta_hat` is central-differenced.
pub fn meta_gradients_fd(
    params: &ModelParams,
    inputs: &[Vec<f64>],
    given: &[Vec<f64>],
    pseudo: &[Vec<f64>],
    meta: &MetaSet,
    cfg: &MetaConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_batch(inputs, given, pseudo, meta)?;
    let n = inputs.len();
    let h = cfg.fd_step;
    let virtual_meta_loss = |eps1: &[f64], eps2: &[f64]| -> Result<f64> {
        let grad = net::grad_batch(params, inputs, given, eps1)? + net::grad_batch(params, inputs, pseudo, eps2)?;
        let theta_hat = params.offset(&grad, -cfg.eta_inner);
        meta_loss(&theta_hat, meta)
    };
    let results = par::map_range(2 * n, |job| -> Result<f64> {
        let (k, i) = (job / n, job % n);
        let mut eps = [vec![0.0; n], vec![0.0; n]];
        eps[k][i] = h;
        let plus = virtual_meta_loss(&eps[0], &eps[1])?;
        eps[k][i] = -h;
        let minus = virtual_meta_loss(&eps[0], &eps[1])?;
        Ok((plus - minus) / (2.0 * h))
    });
    let results = results.into_iter().collect::<Result<Vec<f64>>>()?;
    let (e1, e2) = results.split_at(n);
    Ok((e1.to_vec(), e2.to_vec()))
}

/// Zero-truncates the negated meta-gradients and normalizes them over the batch:
/// `alpha_i = w1_i |B| / (S + xi)`, `beta_i = w2_i |B| / (S + xi)`,
/// `S = sum_k (w1_k + w2_k)`.
pub fn disentangle(e1: &[f64], e2: &[f64], cfg: &MetaConfig, batch_size: usize) -> ReliabilityBatch {
    assert_eq!(e1.len(), e2.len(), "meta-gradient sequences differ in length");
    let raw1: Vec<f64> = e1.iter().map(|g| (-g).max(0.0)).collect();
    let raw2: Vec<f64> = e2.iter().map(|g| (-g).max(0.0)).collect();
    let mass: f64 = raw1.iter().chain(&raw2).sum();
    let scale = batch_size as f64 / (mass + cfg.xi);
    ReliabilityBatch {
        alpha: raw1.iter().map(|w| w * scale).collect(),
        beta: raw2.iter().map(|w| w * scale).collect(),
        raw1,
        raw2,
        ids: Vec::new(),
    }
}
