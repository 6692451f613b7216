//! Per-sample random streams keyed by `(seed, point_id, sample_id)`.
//!
//! The key is folded into one 64-bit word with SplitMix64 finalizers:
//!
//! ```text
//! k = mix(mix(mix(seed) ^ point_id) ^ sample_id)
//! ```
//!
//! and `k` seeds a ChaCha8 generator (counter-based, so the draw sequence of a
//! stream depends on nothing but its key). Samples can therefore be evaluated
//! on any thread in any order with bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic random stream for one cascade sample.
pub type RngStream = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub point_id: u64,
    pub sample_id: u64,
}

impl StreamKey {
    pub fn new(seed: u64, point_id: u64, sample_id: u64) -> Self {
        Self {
            seed,
            point_id,
            sample_id,
        }
    }

    pub fn mixed(&self) -> u64 {
        splitmix64(splitmix64(splitmix64(self.seed) ^ self.point_id) ^ self.sample_id)
    }

    pub fn stream(&self) -> RngStream {
        ChaCha8Rng::seed_from_u64(self.mixed())
    }
}

/// SplitMix64 finalizer (Steele, Lea & Flood).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
