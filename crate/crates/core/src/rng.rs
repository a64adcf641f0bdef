//! Seeded random streams.
//!
//! Every stochastic stage draws from a `ChaCha8Rng` whose seed is derived from
//! the master seed plus a path of stream labels, so the output of a stage never
//! depends on how many values an unrelated stage consumed or on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of stream labels into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Hashes a string label (e.g. a scene id) into a stream label.
pub fn label(s: &str) -> u64 {
    // FNV-1a
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn stream(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Stream labels used by the pipeline stages.
pub mod streams {
    pub const REARRANGE: u64 = 1;
    pub const CAMERA: u64 = 2;
    pub const DIALOG: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const CANDIDATES: u64 = 5;
    pub const CATALOG: u64 = 6;
}
