//! Seeded random streams.
//!
//! Every source of randomness in the crate is a ChaCha20 stream addressed by
//! `(seed, stream)`, so independent consumers (covariate noise, response
//! noise, permutation `k` of a Moran test) never share state and can be
//! evaluated in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type FslmRng = ChaCha20Rng;

pub fn substream(seed: u64, stream: u64) -> FslmRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed for replicate `index` (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
