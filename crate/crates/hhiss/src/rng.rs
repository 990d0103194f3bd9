//! Deterministic sub-seed derivation.
//!
//! Every randomized phase of a run (weight init, validation carve, epoch
//! shuffles, dropout) draws from its own ChaCha stream, derived from the
//! run seed and a phase salt. Streams are independent of each other, so
//! adding or removing one phase never shifts another phase's draws — this
//! is what makes the ablation collapse laws hold bit-for-bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Phase salts. Values are arbitrary but frozen: changing them changes
/// every seeded run.
pub mod salt {
    pub const INIT: u64 = 0x01;
    pub const CARVE: u64 = 0x02;
    pub const SHUFFLE: u64 = 0x03;
    pub const DROPOUT: u64 = 0x04;
    pub const SPLIT: u64 = 0x05;
    pub const SYNTH: u64 = 0x06;
}

/// SplitMix64 step; the standard 64-bit finalizer.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed from a base seed, a phase salt, and a phase-local index
/// (epoch number, subject index, ...).
pub fn sub_seed(base: u64, salt: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15)) ^ index)
}

/// ChaCha stream for a derived sub-seed.
pub fn stream(base: u64, salt: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(base, salt, index))
}
