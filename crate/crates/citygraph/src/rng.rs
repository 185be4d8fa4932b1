//! Deterministic random number streams.
//!
//! Every stochastic stage of the pipeline draws from its own ChaCha8
//! stream whose 256-bit key is assembled from the run seed, a domain tag
//! and up to two indices (tile, block, run, ...). Distinct keys give
//! independent streams, so stages and per-tile or per-block work can run
//! on any number of threads and still produce bitwise identical output.

use rand::{RngExt as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domain tags separating the consumers of randomness.
pub mod domain {
    pub const UNIFORM_TILES: u64 = 1;
    pub const POPULATION: u64 = 2;
    pub const ROLES: u64 = 3;
    pub const HOUSEHOLDS: u64 = 4;
    pub const FRIENDSHIP: u64 = 5;
    pub const PERTURBATION: u64 = 6;
    pub const RUN_SPLIT: u64 = 7;
    pub const ANALYSIS: u64 = 8;
}

/// Stream keyed by `(seed, domain, a, b)`.
pub fn stream(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Derived seed for run `r` of a multi-run experiment.
///
/// Stream-splits the base seed instead of using `base + r`, which would
/// correlate the per-run ChaCha keys.
pub fn run_seed(base: u64, run: u64) -> u64 {
    stream(base, domain::RUN_SPLIT, run, 0).random()
}
