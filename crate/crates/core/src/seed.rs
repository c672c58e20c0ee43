//! Deterministic per-realization seeding.
//!
//! `derive_seed` is a counter-based hash built from the SplitMix64 output
//! function. For a fixed master seed the map `index -> seed` is a composition
//! of bijections on `u64` (odd multiply, add, finalizer), so it is injective
//! over the whole index range, not just the first 2^32 indices. The algorithm
//! uses only wrapping integer arithmetic and is identical on every platform.
//!
//! Each realization then owns a ChaCha8 stream seeded from its derived seed,
//! so its draws depend only on `(master_seed, index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; a bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master_seed: u64, realization_index: u64) -> u64 {
    mix64(mix64(master_seed).wrapping_add(realization_index.wrapping_mul(GOLDEN_GAMMA)))
}

/// Random stream owned by realization `index`.
pub fn realization_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master_seed, index))
}
