//! Random streams and the Gamma/Beta samplers behind reliability-arbitrated Mixup.
//!
//! Gamma variates use the Marsaglia–Tsang squeeze for shape >= 1. Shapes
//! below one are boosted: draw `Gamma(shape + 1)` and scale by
//! `U^(1/shape)`. Beta variates are `X / (X + Y)` for independent Gamma
//! draws `X`, `Y`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent, reproducible stream from a base seed and a tag path.
pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    let mut h = mix64(seed);
    for &t in tags {
        h = mix64(h ^ mix64(t.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Uniform draw on (0, 1].
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// One draw from `Gamma(shape, 1)`.
///
/// Panics if `shape` is not a positive finite number.
pub fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    assert!(
        shape > 0.0 && shape.is_finite(),
        "gamma shape must be positive, got {shape}"
    );
    if shape < 1.0 {
        let boosted = marsaglia_tsang(rng, shape + 1.0);
        return boosted * open_unit(rng).powf(1.0 / shape);
    }
    marsaglia_tsang(rng, shape)
}

fn marsaglia_tsang<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (x, v) = loop {
            let x: f64 = rng.sample(StandardNormal);
            let v = 1.0 + c * x;
            if v > 0.0 {
                break (x, v * v * v);
            }
        };
        let u = open_unit(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Largest `f64` strictly below one.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

/// One draw from `Beta(a, b)`, kept strictly inside (0, 1).
///
/// With very small shapes one Gamma draw can be negligible next to the
/// other and the ratio rounds to an endpoint; such draws are pinned to the
/// nearest representable interior value.
pub fn beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let x = gamma(rng, a);
    let y = gamma(rng, b);
    let s = x + y;
    if s <= 0.0 {
        // both underflowed; fall back on the ratio of the shapes
        return (a / (a + b)).clamp(f64::MIN_POSITIVE, ONE_MINUS);
    }
    (x / s).clamp(f64::MIN_POSITIVE, ONE_MINUS)
}

/// Analytic mean and variance of `Beta(a, b)`.
pub fn beta_moments(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (a / s, a * b / (s * s * (s + 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[1, 2]).random();
        let b: u64 = stream(7, &[1, 2]).random();
        let c: u64 = stream(7, &[2, 1]).random();
        let d: u64 = stream(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn gamma_mean_and_variance_match_shape() {
        // Gamma(k, 1): mean k, variance k.
        for &k in &[0.2f64, 0.7, 1.0, 2.5, 9.0] {
            let mut rng = stream(11, &[k.to_bits()]);
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|_| gamma(&mut rng, k)).collect();
            let (m, v) = moments(&xs);
            let se_mean = (k / n as f64).sqrt();
            assert!((m - k).abs() < 4.0 * se_mean, "shape {k}: mean {m}");
            // variance of the sample variance for Gamma: (mu4 - k^2)/n with mu4 = 3k^2 + 6k
            let se_var = ((3.0 * k * k + 6.0 * k - k * k) / n as f64).sqrt();
            assert!((v - k).abs() < 4.0 * se_var, "shape {k}: var {v}");
            assert!(xs.iter().all(|x| *x > 0.0 && x.is_finite()));
        }
    }

    #[test]
    fn beta_draws_stay_inside_open_interval() {
        let mut rng = stream(3, &[]);
        for _ in 0..20_000 {
            let l = beta(&mut rng, 0.05, 3.8);
            assert!(l > 0.0 && l < 1.0);
            let l = beta(&mut rng, 3.8, 0.05);
            assert!(l > 0.0 && l < 1.0);
        }
    }

    #[test]
    #[should_panic]
    fn gamma_rejects_nonpositive_shape() {
        gamma(&mut stream(0, &[]), 0.0);
    }
}
