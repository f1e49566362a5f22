//! Seeded random streams.
//!
//! Every Monte-Carlo routine takes a `(seed, index)` pair. The pair selects a
//! ChaCha8 key and stream, so replicate `i` draws the same numbers no matter
//! which thread runs it or in which order replicates are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type LabRng = ChaCha8Rng;

/// Deterministic generator for replicate `index` of experiment `seed`.
pub fn stream(seed: u64, index: u64) -> LabRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed so nested loops (cell, replicate) get disjoint keys.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Fills a row-major `n × d` buffer with i.i.d. standard normals.
pub fn standard_normal_matrix<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Vec<f64> {
    (0..n * d).map(|_| standard_normal(rng)).collect()
}
