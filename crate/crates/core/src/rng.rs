//! Seed derivation for reproducible, order-independent Monte Carlo.
//!
//! Every replicate gets its own ChaCha stream derived from (master seed,
//! replicate index), so parallel execution and execution order cannot
//! change results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for replicate `stream` of a run with the given master seed.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a sub-seed for a named component of a larger run.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(tag)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
