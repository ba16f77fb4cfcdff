//! Counter-based random streams.
//!
//! Every random decision is drawn from a generator keyed by a tuple of
//! integers (seed, chain, iteration, ...), so any step can be replayed or
//! resumed without carrying generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Hash a key tuple into one 64-bit seed.
pub fn derive_seed(key: &[u64]) -> u64 {
    key.iter().fold(0x6a09_e667_f3bc_c909, |h, &k| splitmix(h ^ splitmix(k)))
}

pub fn stream(key: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(key))
}
