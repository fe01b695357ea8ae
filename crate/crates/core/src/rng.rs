//! Deterministic seed derivation.
//!
//! Every random quantity is drawn from its own ChaCha stream keyed by
//! `(seed, stream)`, so e.g. user locations stay identical across schemes
//! that consume different amounts of randomness afterwards.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod streams {
    pub const POINTS: u64 = 0x01;
    pub const MARKS: u64 = 0x02;
    pub const PILOT_CHOICE: u64 = 0x03;
    pub const RANDOM_ASSIGNMENT: u64 = 0x04;
    pub const RRHS: u64 = 0x05;
    pub const USERS: u64 = 0x06;
    pub const TRIAL: u64 = 0x07;
    pub const KMEANS: u64 = 0x08;
    pub const SCHEME: u64 = 0x09;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed for `stream`.
#[inline]
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0x5151_7A7A)))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}
