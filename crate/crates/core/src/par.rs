//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the maps fan out over rayon's global pool;
//! without it they run on the calling thread. Outputs keep input order, and
//! [`chunked_sum`] always reduces in the same fixed chunk layout, so both
//! builds produce bit-identical sums.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of items summed sequentially inside one reduction chunk.
pub const REDUCE_CHUNK: usize = 16;

/// Order-preserving map over `0..n`.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Order-preserving map over a slice.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sums `n` dense contributions of length `len`.
///
/// `add_into(i, acc)` must add item `i` into `acc`. Items are grouped into
/// consecutive chunks of [`REDUCE_CHUNK`]; each chunk is accumulated left to
/// right, then chunk partials are added left to right. The grouping does not
/// depend on the thread count or the feature flag.
pub fn chunked_sum<F>(n: usize, len: usize, add_into: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_range(chunks, |c| {
        let mut acc = vec![0.0; len];
        let end = ((c + 1) * REDUCE_CHUNK).min(n);
        for i in c * REDUCE_CHUNK..end {
            add_into(i, &mut acc);
        }
        acc
    });
    let mut total = vec![0.0; len];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Scalar counterpart of [`chunked_sum`].
pub fn chunked_sum_scalar<F>(n: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_range(chunks, |c| {
        let end = ((c + 1) * REDUCE_CHUNK).min(n);
        (c * REDUCE_CHUNK..end).map(&term).fold(0.0, |a, b| a + b)
    });
    partials.into_iter().fold(0.0, |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_fixed_order_reference() {
        let n = 53;
        let got = chunked_sum(n, 2, |i, acc| {
            acc[0] += (i as f64).sqrt();
            acc[1] += 1.0 / (1.0 + i as f64);
        });
        let mut want: [f64; 2] = [0.0; 2];
        for c in 0..n.div_ceil(REDUCE_CHUNK) {
            let mut part: [f64; 2] = [0.0; 2];
            for i in c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(n) {
                part[0] += (i as f64).sqrt();
                part[1] += 1.0 / (1.0 + i as f64);
            }
            want[0] += part[0];
            want[1] += part[1];
        }
        assert_eq!(got, want.to_vec());
        let s = chunked_sum_scalar(n, |i| (i as f64).sqrt());
        assert_eq!(s.to_bits(), want[0].to_bits());
    }

    #[test]
    fn empty_sums_are_zero() {
        assert_eq!(chunked_sum(0, 3, |_, _| unreachable!()), vec![0.0; 3]);
        assert_eq!(chunked_sum_scalar(0, |_| 1.0), 0.0);
    }
}
