//! Deterministic reductions.
//!
//! Every sum over grid points goes through [`det_sum`]: the index range is cut
//! into fixed-size chunks, each chunk is summed left to right, and the chunk
//! totals are combined pairwise. The chunking never depends on the number of
//! worker threads, so results are bit-identical across schedules.

use rayon::prelude::*;

pub(crate) const CHUNK: usize = 4096;

/// Pairwise (cascade) summation of a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sum `term(i)` for `i in 0..n` in a fixed order.
pub fn det_sum<F>(n: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut s = 0.0;
            for i in lo..hi {
                s += term(i);
            }
            s
        })
        .collect();
    pairwise_sum(&partial)
}

/// Dot product with the same fixed order as [`det_sum`].
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    det_sum(a.len(), |i| a[i] * b[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 49_995_000.0);
        assert_eq!(det_sum(xs.len(), |i| xs[i]), 49_995_000.0);
    }

    #[test]
    fn det_sum_is_reproducible() {
        let xs: Vec<f64> = (0..50_000).map(|i| ((i as f64) * 0.37).sin()).collect();
        let a = det_sum(xs.len(), |i| xs[i]);
        let b = det_sum(xs.len(), |i| xs[i]);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
