//! Seed handling.
//!
//! Every random choice in the crate flows from a single `u64` seed. Each
//! consumer asks for its own named stream, so adding a new consumer never
//! shifts the draws seen by existing ones. The stream key is derived by
//! hashing the label into the seed (FNV-1a) and running the result through
//! a splitmix64 finalizer; the stream itself is ChaCha8, which is stable
//! across platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic generator for the consumer named `label`, derived from the
/// experiment seed.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let sub_seed = splitmix64(seed ^ fnv1a(label.as_bytes()));
    ChaCha8Rng::seed_from_u64(sub_seed)
}
