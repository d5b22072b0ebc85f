//! Deterministic seed derivation.
//!
//! One master seed fans out into independent streams keyed by a path of
//! integer tags (fold, symbol, tree, ...), so results never depend on the
//! order in which parallel work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a tag.
pub fn derive(parent: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn derive_path(parent: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(parent, |s, &t| derive(s, t))
}

/// Stable 64-bit tag for a string key (FNV-1a).
pub fn tag_str(s: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01B3);
    }
    h
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
