//! Seeded random streams.
//!
//! Every stream is a SplitMix64 generator. Stream `k` of a run with seed `s`
//! starts from state `s + k · 0x9E3779B97F4A7C15` (wrapping), so restarts
//! can be drawn in any order, or in parallel, and still reproduce exactly.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::operator::SignPattern;

const STREAM_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Generator for stream `index` of `seed`.
pub fn stream(seed: u64, index: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed.wrapping_add(index.wrapping_mul(STREAM_STRIDE)))
}

pub fn random_signs(rng: &mut impl Rng, n: usize) -> SignPattern {
    SignPattern::new((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
        .expect("entries are ±1")
}

/// Uniform draw from `[-1, 1]^n`.
pub fn random_box(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}
