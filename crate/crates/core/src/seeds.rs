//! Seed derivation shared by every stochastic component.
//!
//! Parallel jobs never share a generator. Each job derives its own seed from
//! the base seed and a stable job key, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finaliser.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for an independent sub-stream labelled by `stream`.
pub fn derive(base: u64, stream: u64) -> u64 {
    mix(base ^ mix(stream))
}

/// Stable hash of a sorted index set; the empty set hashes to 0.
pub fn hash_indices(indices: &[usize]) -> u64 {
    indices
        .iter()
        .fold(0u64, |h, &i| mix(h ^ mix(i as u64 + 1)))
}
