//! Seed derivation and seeded generators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with a sequence of stream labels.
///
/// Results depend only on the inputs, so parallel work items can derive their
/// own seeds without coordination.
pub fn derive_seed(root: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix64(root), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(root: u64, labels: &[u64]) -> ChaCha8Rng {
    rng_from(derive_seed(root, labels))
}

/// Stream labels used across the crate.
pub mod stream {
    pub const SAMPLE: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const BATCH: u64 = 4;
    pub const VALIDATION: u64 = 5;
    pub const ENSEMBLE: u64 = 6;
    pub const KKL_START: u64 = 7;
}
