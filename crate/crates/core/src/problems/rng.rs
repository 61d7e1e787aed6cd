//! Reproducible random data.
//!
//! All generated instances draw from SplitMix64 (Steele, Lea & Flood), a
//! counter-based 64-bit generator: the state advances by the constant
//! `0x9E3779B97F4A7C15` and each output is a fixed mixing of the state.
//! Uniform doubles take the top 53 bits: `u = (next >> 11) · 2⁻⁵³ ∈ [0, 1)`,
//! and samples on `[−1, 1)` are `2u − 1`. The same stream can be rebuilt in
//! any language from the seed alone.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

#[derive(Clone, Debug)]
pub struct DataRng(SplitMix64);

impl DataRng {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform on `[−1, 1)`.
    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.unit() - 1.0
    }
}

/// Derives a per-item seed from a global seed and a string key (FNV-1a of the
/// key, folded into the seed and passed through one SplitMix64 step).
pub fn derive_seed(global: u64, key: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in key.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    DataRng::new(global ^ hash).next_u64()
}
