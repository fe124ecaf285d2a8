//! Seed streams.
//!
//! Every replica owns a Xoshiro256++ generator. The 64-bit seed handed to
//! `seed_from_u64` is `mix64(master, index)`:
//!
//! ```text
//! z = master ^ (index + 1) * 0x9E37_79B9_7F4A_7C15      (wrapping)
//! z = (z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9
//! z = (z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB
//! z ^ (z >> 31)
//! ```
//!
//! `seed_from_u64` itself expands the 64-bit value with SplitMix64, so a
//! stream is fully determined by `(master, index)` and the generator spec.
//! Independent experiments derive their master with [`derive`] and a tag.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Stream = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn mix64(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for replica `index` under `master`.
pub fn stream(master: u64, index: u64) -> Stream {
    Stream::seed_from_u64(mix64(master, index))
}

/// Child master seed for a named sub-experiment (FNV-1a over the tag).
pub fn derive(master: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix64(master, h)
}
