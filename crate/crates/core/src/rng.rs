//! Seed derivation and per-purpose random streams.
//!
//! All randomness comes from ChaCha8, a counter-based generator: a seed
//! selects the key and a stream id selects an independent sequence, so
//! results never depend on the order work is scheduled in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream ids reserved by instance generation.
pub(crate) mod stream {
    pub const SIGNAL: u64 = 0;
    pub const CORRUPTION: u64 = 1;
    pub const SENSING: u64 = 2;
    pub const POWER_ITERATION: u64 = 3;
    pub const RSV: u64 = 4;
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a base seed together with any number of keys into a new seed.
pub fn derive_seed(base: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(mix(base), |acc, k| mix(acc ^ mix(*k)))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}
