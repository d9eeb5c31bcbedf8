//! Deterministic RNG streams.
//!
//! Every random draw in the pipeline comes from a stream derived from the
//! root seed plus a stable label, so results do not depend on thread count
//! or iteration order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stable 64-bit FNV-1a hash. Used instead of `DefaultHasher`, whose output
/// may change between std releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a root seed and a label.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    splitmix(root ^ fnv1a(label.as_bytes()))
}

/// Derives a child seed from a root seed and an index.
pub fn derive_seed_indexed(root: u64, label: &str, index: u64) -> u64 {
    splitmix(derive_seed(root, label) ^ splitmix(index))
}

/// The pipeline's RNG. ChaCha has a specified stream, so seeds reproduce
/// byte-identical results across platforms.
pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
