//! Deterministic stream derivation.
//!
//! Every random draw in the filter comes from a ChaCha stream whose seed is a
//! hash of the run seed and a purpose-specific path (scan, component, track),
//! so results do not depend on evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn combine(a: u64, b: u64) -> u64 {
    mix64(a ^ mix64(b).rotate_left(17))
}

pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let key = path.iter().fold(mix64(seed), |acc, &p| combine(acc, p));
    ChaCha8Rng::seed_from_u64(key)
}

/// Purpose tags used as the first element of a stream path.
pub mod purpose {
    pub const ALLOCATION: u64 = 1;
    pub const GIBBS: u64 = 2;
    pub const PREDICT: u64 = 3;
    pub const UPDATE: u64 = 4;
    pub const BIRTH: u64 = 5;
    pub const TRUTH: u64 = 6;
    pub const MEASURE: u64 = 7;
}
