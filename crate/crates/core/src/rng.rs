//! Seeded random stream shared by initialization and noise generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// A ChaCha20 stream that counts how many variates have been drawn from it.
///
/// ChaCha output is specified bit-for-bit, so a seed reproduces the same
/// variates on every platform.
#[derive(Debug, Clone)]
pub struct SeededStream {
    rng: ChaCha20Rng,
    draws: u64,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        SeededStream {
            rng: ChaCha20Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    /// Uniform variate on `[-bound, bound)`.
    pub fn uniform_symmetric(&mut self, bound: f64) -> f64 {
        self.draws += 1;
        let u: f64 = self.rng.random();
        (2.0 * u - 1.0) * bound
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.draws += 1;
        self.rng.sample(StandardNormal)
    }

    /// Number of variates drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }
}

/// SplitMix64 finalizer; a bijective 64-bit mix.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
