//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit digest of
//! `(seed, part, part, ...)`, so a trial's draws depend only on its own
//! coordinates and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which sample set a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    F1 = 1,
    F2 = 2,
    Aux = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Digest of a seed and a path of stream coordinates.
pub fn derive_key(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_key(seed, parts))
}

/// Stream for one sample set of one Monte Carlo trial.
pub fn trial_stream(seed: u64, cell: u64, trial: u64, role: StreamRole) -> ChaCha8Rng {
    stream(seed, &[cell, trial, role as u64])
}
