//! Seeded randomness. Every stochastic routine in this crate takes an explicit
//! `u64` seed and draws from a ChaCha8 stream so runs replicate bit-for-bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in run manifests so alternate implementations can replicate
/// the streams.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha seed_from_u64)";

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
