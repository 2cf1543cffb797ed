//! Seed derivation for independent replicas.
//!
//! Every replica owns a `ChaCha8Rng` seeded from
//! `splitmix64(master ^ fnv1a(tag) ^ splitmix64(index))`, so a replica's
//! stream depends only on (master seed, experiment tag, replica index) and
//! never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, byte| {
        (h ^ u64::from(byte)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    splitmix64(master ^ fnv1a(tag) ^ splitmix64(index))
}

pub fn replica_rng(master: u64, tag: &str, index: u64) -> ChainRng {
    ChainRng::seed_from_u64(derive_seed(master, tag, index))
}
