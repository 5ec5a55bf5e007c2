//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a global seed plus a
//! component label (and optionally a few indices), so adding a new consumer
//! never shifts the streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derives a sub-seed from `seed`, a component `label` and a list of indices.
pub fn derive(seed: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ fnv1a(label.as_bytes()));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i));
    }
    h
}

/// A ChaCha8 generator for the derived stream.
pub fn rng(seed: u64, label: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, label, indices))
}
