//! Counter-based random substreams.
//!
//! Every stream is derived from the master seed and a path of tags
//! (purpose, trial, node, ...), so the value drawn by one trial never depends
//! on how many other trials ran before it or on which thread ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags for the first path element.
pub mod purpose {
    pub const TOPOLOGY: u64 = 1;
    pub const PROFILES: u64 = 2;
    pub const TRIAL: u64 = 3;
}

/// Purpose tags used below a trial.
pub mod trial_purpose {
    pub const PLANT: u64 = 0;
    pub const SOURCE: u64 = 1;
    pub const NOISE: u64 = 2;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit seed from the master seed and a tag path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

pub fn substream(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}
