//! Reliability-arbitrated Mixup.
//!
//! Each sample's total reliability `r = clamp(alpha + beta, r_min, r_max)`
//! shapes the Beta law of the interpolation coefficient: the pair `(i, j)`
//! draws `lambda ~ Beta(gamma r_i / (r_i + r_j + delta), gamma r_j / (r_i + r_j + delta))`,
//! so the mix leans towards the more reliable endpoint. The pair's loss term
//! is gated by `max(r_i, r_j)` and the gates are not renormalized.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::net::{self, GradientVector, ModelParams};
use crate::sampling::{self, StreamRng};
use crate::{HrpError, Result};

/// How the interpolation coefficient is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaLaw {
    /// Reliability-proportional shapes.
    Asymmetric,
    /// Classic Mixup, `Beta(gamma, gamma)`; used for the ablation.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamConfig {
    pub gamma: f64,
    pub delta: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub law: LambdaLaw,
    /// Apply the `max(r_i, r_j)` gate; when off every pair weighs 1.
    pub gating: bool,
}

impl Default for RamConfig {
    fn default() -> Self {
        RamConfig {
            gamma: 4.0,
            delta: 1e-8,
            r_min: 0.1,
            r_max: 2.0,
            law: LambdaLaw::Asymmetric,
            gating: true,
        }
    }
}

impl RamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(HrpError::Config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.delta > 0.0) {
            return Err(HrpError::Config(format!("delta must be > 0, got {}", self.delta)));
        }
        if !(0.0 < self.r_min && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(HrpError::Config(format!(
                "need 0 < r_min < r_max, got r_min = {}, r_max = {}",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    /// Shape parameters of the interpolation law for the pair `(r_i, r_j)`.
    pub fn beta_shapes(&self, r_i: f64, r_j: f64) -> (f64, f64) {
        match self.law {
            LambdaLaw::Asymmetric => {
                let denom = r_i + r_j + self.delta;
                (self.gamma * r_i / denom, self.gamma * r_j / denom)
            }
            LambdaLaw::Symmetric => (self.gamma, self.gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixPair {
    pub i: usize,
    pub j: usize,
    pub lambda: f64,
    pub w_mix: f64,
    pub x_mix: Vec<f64>,
    pub y_mix: Vec<f64>,
}

pub fn total_reliability(alpha: f64, beta: f64, cfg: &RamConfig) -> f64 {
    (alpha + beta).clamp(cfg.r_min, cfg.r_max)
}

pub fn sample_lambda(r_i: f64, r_j: f64, cfg: &RamConfig, rng: &mut StreamRng) -> f64 {
    let (a, b) = cfg.beta_shapes(r_i, r_j);
    sampling::beta(rng, a, b)
}

/// Global reliability gate of a pair.
pub fn grg_weight(r_i: f64, r_j: f64) -> f64 {
    r_i.max(r_j)
}

/// Interpolates one pair; `w_mix` is the caller-supplied gate.
pub fn mix_pair(
    i: usize,
    j: usize,
    lambda: f64,
    w_mix: f64,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> MixPair {
    let lerp = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(u, v)| lambda * u + (1.0 - lambda) * v).collect()
    };
    MixPair {
        i,
        j,
        lambda,
        w_mix,
        x_mix: lerp(&inputs[i], &inputs[j]),
        y_mix: lerp(&targets[i], &targets[j]),
    }
}

/// Uniformly random partner assignment without fixed points (a uniform
/// derangement by rejection), or the identity for a single sample.
pub fn partner_permutation(n: usize, rng: &mut StreamRng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    if n < 2 {
        return perm;
    }
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &j)| i != j) {
            return perm;
        }
    }
}

/// One mixed pair per sample: sample `i` with partner `perm[i]`.
pub fn build_pairs(
    inputs: &[Vec<f64>],
    reliabilities: &[f64],
    refined_targets: &[Vec<f64>],
    cfg: &RamConfig,
    rng: &mut StreamRng,
) -> Result<Vec<MixPair>> {
    let n = inputs.len();
    if n == 0 {
        return Err(HrpError::Contract("cannot build Mixup pairs for an empty batch".into()));
    }
    if reliabilities.len() != n || refined_targets.len() != n {
        return Err(HrpError::Contract("reliabilities and targets must match the batch".into()));
    }
    let perm = partner_permutation(n, rng);
    Ok(perm
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let (ri, rj) = (reliabilities[i], reliabilities[j]);
            let lambda = sample_lambda(ri, rj, cfg, rng);
            let gate = if cfg.gating { grg_weight(ri, rj) } else { 1.0 };
            mix_pair(i, j, lambda, gate, inputs, refined_targets)
        })
        .collect())
}

/// `(1/|B|) sum_pairs w_mix * CE(f(x_mix), y_mix)` and its gradient.
pub fn ram_loss_with_grad(
    params: &ModelParams,
    pairs: &[MixPair],
    batch_size: usize,
) -> Result<(f64, GradientVector)> {
    if batch_size == 0 {
        return Ok((0.0, GradientVector::zeros(params.data.len())));
    }
    let inv = 1.0 / batch_size as f64;
    let xs: Vec<Vec<f64>> = pairs.iter().map(|p| p.x_mix.clone()).collect();
    let ts: Vec<Vec<f64>> = pairs.iter().map(|p| p.y_mix.clone()).collect();
    let cs: Vec<f64> = pairs.iter().map(|p| p.w_mix * inv).collect();
    net::weighted_ce(params, &xs, &ts, &cs)
}

pub fn ram_loss(params: &ModelParams, pairs: &[MixPair], batch_size: usize) -> Result<f64> {
    Ok(ram_loss_with_grad(params, pairs, batch_size)?.0)
}
