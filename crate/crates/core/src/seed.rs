//! Deterministic seed derivation.
//!
//! Every random stream in the toolkit is keyed by a `(seed, stream)` pair so
//! that data, initialisation and dropout never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the independent sub-seeds of a run.
pub mod stream {
    pub const DATA: u64 = 0x6461_7461;
    pub const INIT: u64 = 0x696e_6974;
    pub const DROPOUT: u64 = 0x6472_6f70;
    pub const SHUFFLE: u64 = 0x7368_7566;
    pub const MC: u64 = 0x6d63_6d63;
    pub const CORRUPT: u64 = 0x636f_7272;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `seed` with a stream tag into a new, well-spread seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ stream.rotate_left(17))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
