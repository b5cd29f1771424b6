//! Seed derivation for independent, reproducible random streams.
//!
//! Every stochastic component draws from a [`SimRng`] whose seed is derived
//! from the master seed and a path of integers (iteration, episode, ...).
//! Streams therefore depend only on *which* unit of work they belong to, never
//! on scheduling, so results are identical for any worker count.

use rand::SeedableRng;

pub type SimRng = rand_chacha::ChaCha8Rng;

/// Labels used as the first path element to keep stream families disjoint.
pub mod domain {
    pub const INIT: u64 = 1;
    pub const ROLLOUT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const VALIDATE: u64 = 5;
    pub const ORACLE: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}
