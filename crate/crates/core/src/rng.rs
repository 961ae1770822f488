//! Seeded randomness shared by partitioning, subsampling and simulation.
//!
//! Streams are ChaCha8 generators whose seeds are mixed from a master seed and
//! a path of indices, so replicate `r` and method `m` always see the same
//! stream regardless of scheduling. Shuffles use an explicit Fisher–Yates with
//! a local bounded-integer draw so index orders do not depend on library
//! internals.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type PimRng = ChaCha8Rng;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream at `path` below `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &k| mix(acc ^ mix(k)))
}

pub fn stream(master: u64, path: &[u64]) -> PimRng {
    PimRng::seed_from_u64(derive_seed(master, path))
}

/// Uniform integer in `0..bound` (Lemire's method with rejection).
pub fn below(rng: &mut impl RngCore, bound: usize) -> usize {
    assert!(bound > 0);
    let bound = bound as u64;
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let m = (rng.next_u64() as u128) * (bound as u128);
        if (m as u64) >= threshold {
            return (m >> 64) as usize;
        }
    }
}

/// Uniformly random permutation of `0..n`.
pub fn permutation(rng: &mut impl RngCore, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = below(rng, i + 1);
        idx.swap(i, j);
    }
    idx
}

/// `k` distinct indices from `0..n`, uniformly (partial Fisher–Yates).
pub fn sample_without_replacement(rng: &mut impl RngCore, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + below(rng, n - i);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}
