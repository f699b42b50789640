//! Seed derivation for reproducible ensembles.
//!
//! Realization `i` of an ensemble with master seed `m` is driven by a ChaCha8
//! stream seeded with `splitmix64(m ^ (i · 0x9E3779B97F4A7C15))`. The result does
//! not depend on how realizations are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn realization_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ index.wrapping_mul(GOLDEN))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
