//! Consensus-driven contrastive learning.
//!
//! Weak and strong views of a batch are embedded, L2-normalized and stacked
//! into a `2N x P` bank. Positives are rows sharing the co-network's
//! pseudo-class (never the observed labels, which this module cannot see),
//! and each positive pair is gated by the product of min-max normalized
//! pseudo-label reliabilities.

use serde::{Deserialize, Serialize};

use crate::net::{self, GradientVector, ModelParams, Mode};
use crate::{par, HrpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdclConfig {
    pub tau: f64,
    /// Below this spread of `beta` the batch is treated as uniform.
    pub range_eps: f64,
}

impl Default for CdclConfig {
    fn default() -> Self {
        CdclConfig {
            tau: 0.2,
            range_eps: 1e-6,
        }
    }
}

impl CdclConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(HrpError::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.range_eps >= 0.0) {
            return Err(HrpError::Config("range_eps must be >= 0".into()));
        }
        Ok(())
    }
}

/// Row-stacked normalized embeddings: rows `0..N` are weak views, rows
/// `N..2N` the strong views of the same sources in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    pub z: Vec<Vec<f64>>,
    /// Rows whose raw embedding was the zero vector.
    pub degenerate: Vec<bool>,
    pub pseudo_class: Vec<usize>,
    pub beta: Vec<f64>,
}

impl FeatureBank {
    /// Builds the bank from raw embeddings and per-source pseudo-classes and
    /// reliabilities (duplicated across the two views).
    pub fn from_embeddings(
        weak: &[Vec<f64>],
        strong: &[Vec<f64>],
        pseudo_class: &[usize],
        beta: &[f64],
    ) -> Result<FeatureBank> {
        let n = weak.len();
        if strong.len() != n || pseudo_class.len() != n || beta.len() != n {
            return Err(HrpError::Contract("bank inputs must share the batch length".into()));
        }
        let (z, degenerate) = weak.iter().chain(strong).map(|e| net::l2_normalize(e)).unzip();
        Ok(FeatureBank {
            z,
            degenerate,
            pseudo_class: pseudo_class.iter().chain(pseudo_class).copied().collect(),
            beta: beta.iter().chain(beta).copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.z.len()
    }

    /// Number of source samples (`N`).
    pub fn sources(&self) -> usize {
        self.z.len() / 2
    }
}

/// Min-max normalization with a uniform fallback: a batch whose reliabilities
/// span less than `range_eps` maps to all ones.
pub fn normalize_beta(beta: &[f64], cfg: &CdclConfig) -> Vec<f64> {
    if beta.is_empty() {
        return Vec::new();
    }
    let lo = beta.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = beta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < cfg.range_eps {
        return vec![1.0; beta.len()];
    }
    beta.iter().map(|b| (b - lo) / (hi - lo + 1e-8)).collect()
}

/// `P(i) = { j != i : class_j == class_i }`, ascending.
pub fn positive_sets(pseudo_class: &[usize]) -> Vec<Vec<usize>> {
    (0..pseudo_class.len())
        .map(|i| {
            (0..pseudo_class.len())
                .filter(|&j| j != i && pseudo_class[j] == pseudo_class[i])
                .collect()
        })
        .collect()
}

/// `w_ij = b_i * b_j` for every `j` in `P(i)`, aligned with `positives[i]`.
pub fn consensus_weights(beta_norm: &[f64], positives: &[Vec<usize>]) -> Vec<Vec<f64>> {
    positives
        .iter()
        .enumerate()
        .map(|(i, ps)| ps.iter().map(|&j| beta_norm[i] * beta_norm[j]).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Anchor {
    /// `sum_j w_ij (s_ij / tau - lse_i)` over positives.
    weighted_log_prob: f64,
    /// Softmax over `k != i` of `s_ik / tau` (entry `i` is zero).
    softmax: Vec<f64>,
}

fn anchor_terms(bank: &FeatureBank, positives: &[Vec<usize>], weights: &[Vec<f64>], tau: f64) -> Vec<Anchor> {
    let rows = bank.rows();
    par::map_range(rows, |i| {
        let logits: Vec<f64> = (0..rows)
            .map(|k| if k == i { f64::NEG_INFINITY } else { dot(&bank.z[i], &bank.z[k]) / tau })
            .collect();
        let lse = net::log_sum_exp(&logits);
        let weighted_log_prob = positives[i]
            .iter()
            .zip(&weights[i])
            .map(|(&j, w)| w * (logits[j] - lse))
            .sum();
        let softmax = logits.iter().map(|l| (l - lse).exp()).collect();
        Anchor {
            weighted_log_prob,
            softmax,
        }
    })
}

/// Gated InfoNCE over anchors with at least one positive; 0 when none has.
pub fn cdcl_loss(bank: &FeatureBank, cfg: &CdclConfig) -> f64 {
    cdcl_loss_with_zgrad(bank, cfg).0
}

/// Loss and its gradient with respect to every bank row.
pub fn cdcl_loss_with_zgrad(bank: &FeatureBank, cfg: &CdclConfig) -> (f64, Vec<Vec<f64>>) {
    let rows = bank.rows();
    let dim = bank.z.first().map_or(0, |r| r.len());
    let positives = positive_sets(&bank.pseudo_class);
    let weights = consensus_weights(&normalize_beta(&bank.beta, cfg), &positives);
    let valid = positives.iter().filter(|p| !p.is_empty()).count();
    if valid == 0 {
        return (0.0, vec![vec![0.0; dim]; rows]);
    }
    let anchors = anchor_terms(bank, &positives, &weights, cfg.tau);
    let coef: Vec<f64> = positives
        .iter()
        .map(|p| if p.is_empty() { 0.0 } else { -1.0 / (valid as f64 * p.len() as f64) })
        .collect();
    let loss = (0..rows).map(|i| coef[i] * anchors[i].weighted_log_prob).sum();

    // d loss / d s_ik for k != i, with s_ik = z_i . z_k
    let ds: Vec<Vec<f64>> = par::map_range(rows, |i| {
        let mut g = vec![0.0; rows];
        if coef[i] == 0.0 {
            return g;
        }
        let total_w: f64 = weights[i].iter().sum();
        for k in 0..rows {
            if k != i {
                g[k] = -total_w * anchors[i].softmax[k];
            }
        }
        for (&j, w) in positives[i].iter().zip(&weights[i]) {
            g[j] += w;
        }
        g.iter_mut().for_each(|v| *v *= coef[i] / cfg.tau);
        g
    });
    let dz = par::map_range(rows, |i| {
        let mut acc = vec![0.0; dim];
        for k in 0..rows {
            let g = ds[i][k] + ds[k][i];
            if g != 0.0 {
                for (a, zk) in acc.iter_mut().zip(&bank.z[k]) {
                    *a += g * zk;
                }
            }
        }
        acc
    });
    (loss, dz)
}

/// Loss and parameter gradient through the projection head and trunk.
pub fn cdcl_loss_with_grad(
    params: &ModelParams,
    weak_inputs: &[Vec<f64>],
    strong_inputs: &[Vec<f64>],
    pseudo_class: &[usize],
    beta: &[f64],
    cfg: &CdclConfig,
) -> Result<(f64, GradientVector)> {
    let inputs: Vec<Vec<f64>> = weak_inputs.iter().chain(strong_inputs).cloned().collect();
    let outs = net::forward_batch(params, &inputs, Mode::Train)?;
    let n = weak_inputs.len();
    let emb: Vec<Vec<f64>> = outs.into_iter().map(|o| o.embedding).collect();
    let bank = FeatureBank::from_embeddings(&emb[..n], &emb[n..], pseudo_class, beta)?;
    let (loss, dz) = cdcl_loss_with_zgrad(&bank, cfg);
    let d_emb: Vec<Vec<f64>> = emb
        .iter()
        .zip(&dz)
        .map(|(e, g)| net::l2_normalize_backward(e, g))
        .collect();
    let grad = net::embedding_backward(params, &inputs, &d_emb)?;
    Ok((loss, grad))
}
