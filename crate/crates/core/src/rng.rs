//! Counter-based seeding.
//!
//! Every random draw in the crate comes from a generator keyed by
//! `(seed, row, stream)`, so a row's output does not depend on the order in
//! which rows are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over a stream name, used to turn labels into stream ids.
pub fn stream_id(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Key derived from `(seed, row, stream)`.
pub fn key(seed: u64, row: u64, stream: &str) -> u64 {
    mix64(mix64(seed ^ stream_id(stream)).wrapping_add(row.wrapping_mul(GOLDEN)))
}

/// Generator for one `(seed, row, stream)` cell.
pub fn keyed(seed: u64, row: u64, stream: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key(seed, row, stream))
}

/// Seed for a named pipeline stage derived from the global seed.
pub fn derive_seed(global: u64, stage: &str) -> u64 {
    mix64(global ^ stream_id(stage).rotate_left(17))
}

/// Uniform draw in `[0, 1)` from a key, without building a generator.
pub fn unit_from_key(k: u64) -> f64 {
    (mix64(k) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
