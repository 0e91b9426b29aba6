//! Seed derivation. Every random object in an experiment is generated from a
//! seed derived from the master seed, so one integer reproduces a whole run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a stream tag.
pub fn derive(parent: u64, tag: u64) -> u64 {
    mix64(mix64(parent) ^ tag.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Stream tags used by the trial pipeline.
pub mod tag {
    pub const SPLIT: u64 = 1;
    pub const POOL: u64 = 2;
    pub const TRAIN_ASSIGN: u64 = 3;
    pub const TEST_ASSIGN: u64 = 4;
    pub const TRIAL: u64 = 5;
    pub const PAIR: u64 = 6;
    pub const FOLD: u64 = 7;
    pub const SCHEME: u64 = 8;
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
