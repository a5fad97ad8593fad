//! Seeded random streams. Every random draw in the crate goes through here so
//! runs are reproducible from a single `u64` seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream identifiers, kept distinct so unrelated consumers never share draws.
pub mod streams {
    pub const DISTILLED_INIT: u64 = 1;
    pub const REAL_BATCH: u64 = 2;
    pub const TRAIN_SHUFFLE: u64 = 3;
    pub const SUBSAMPLE: u64 = 4;
    pub const KMEANS: u64 = 5;
    pub const LINEAR_PROBLEM: u64 = 6;
    pub const PROBE: u64 = 7;
}
