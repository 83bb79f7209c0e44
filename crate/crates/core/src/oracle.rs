//! Independent reference computations: finite differences, naive loops and
//! brute-force counts. Nothing here calls the analytic backward passes or
//! the production loss assemblies it is used to check.

use crate::net::ModelParams;
use crate::par;

/// Absolute floor for the denominator of [`rel_error`]; gradient entries
/// smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, REL_FLOOR)`.
pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

pub fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| rel_error(*x, *y))
        .fold(0.0, f64::max)
}

/// Central-difference gradient of `loss` at `params`, one coordinate at a time.
pub fn central_difference_grad<F>(params: &ModelParams, step: f64, loss: F) -> Vec<f64>
where
    F: Fn(&ModelParams) -> f64 + Sync + Send,
{
    par::map_range(params.data.len(), |k| {
        let mut plus = params.clone();
        plus.data[k] += step;
        let mut minus = params.clone();
        minus.data[k] -= step;
        (loss(&plus) - loss(&minus)) / (2.0 * step)
    })
}

/// Random parameters for gradient checks. Biases are drawn too: with the
/// zero biases of [`crate::net::init_params`], a dead first layer puts the
/// second layer exactly on the rectifier kink, where one-sided slopes differ
/// and central differences are meaningless.
pub fn fixture_params(arch: crate::net::Arch, seed: u64) -> ModelParams {
    use rand::Rng;
    let mut p = crate::net::init_params(arch, seed);
    let mut rng = crate::sampling::stream(seed, &[0xF1C5]);
    let (_, b1, _, b2, _, bc, _, bp) = p.blocks_mut();
    for b in [b1, b2, bc, bp] {
        for v in b.iter_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    p
}

/// Gated InfoNCE by explicit double loop over the full `2N x 2N` similarity
/// matrix, with the denominator summed directly rather than via log-sum-exp.
pub fn naive_cdcl_loss(z: &[Vec<f64>], pseudo_class: &[usize], beta: &[f64], tau: f64, range_eps: f64) -> f64 {
    let rows = z.len();
    let lo = beta.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = beta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gate = |i: usize| {
        if hi - lo < range_eps {
            1.0
        } else {
            (beta[i] - lo) / (hi - lo + 1e-8)
        }
    };
    let sim = |i: usize, k: usize| z[i].iter().zip(&z[k]).map(|(a, b)| a * b).sum::<f64>() / tau;
    let mut total = 0.0;
    let mut anchors = 0usize;
    for i in 0..rows {
        let mut denom = 0.0;
        for k in 0..rows {
            if k != i {
                denom += sim(i, k).exp();
            }
        }
        let mut acc = 0.0;
        let mut count = 0usize;
        for j in 0..rows {
            if j != i && pseudo_class[j] == pseudo_class[i] {
                acc += gate(i) * gate(j) * (sim(i, j).exp() / denom).ln();
                count += 1;
            }
        }
        if count > 0 {
            total += -acc / count as f64;
            anchors += 1;
        }
    }
    if anchors == 0 {
        0.0
    } else {
        total / anchors as f64
    }
}

/// AUROC by counting every (ID, OOD) pair: wins count 1, ties 1/2.
pub fn brute_force_auroc(id: &[f64], ood: &[f64]) -> f64 {
    let mut wins = 0.0;
    for a in id {
        for b in ood {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    wins / (id.len() * ood.len()) as f64
}

/// FPR95 by sweeping every observed score as a threshold and keeping the
/// lowest false-positive rate among thresholds with TPR >= 0.95.
pub fn sweep_fpr95(id: &[f64], ood: &[f64]) -> f64 {
    let mut best = 1.0f64;
    for &t in id.iter().chain(ood) {
        let tpr = id.iter().filter(|&&s| s >= t).count() as f64 / id.len() as f64;
        if tpr >= 0.95 {
            let fpr = ood.iter().filter(|&&s| s >= t).count() as f64 / ood.len() as f64;
            best = best.min(fpr);
        }
    }
    best
}
