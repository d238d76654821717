//! Seeded random streams.
//!
//! Every consumer gets its own stream derived from the experiment seed and a
//! label, so drawing from one model never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::similarity::fnv1a64;

pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a64(label.as_bytes())))
}

pub fn stream(seed: u64, label: &str) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}
