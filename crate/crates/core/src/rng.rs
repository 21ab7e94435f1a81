//! Counter-based random numbers.
//!
//! Every draw is a pure function of its key, so the order in which masks or
//! shuffles are requested (or the thread that requests them) never changes
//! the value that comes out.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes an arbitrary key tuple into 64 well-mixed bits.
pub fn hash_key(parts: &[u64]) -> u64 {
    let mut acc = mix(GOLDEN);
    for (i, &p) in parts.iter().enumerate() {
        acc = mix(acc ^ mix(p.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1))));
    }
    acc
}

/// Uniform draw in [0, 1) keyed by `parts`.
pub fn uniform(parts: &[u64]) -> f64 {
    (hash_key(parts) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A seeded stream generator for work that is naturally sequential
/// (shuffles, synthetic data).
pub fn stream(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash_key(parts))
}

/// Domain tags so that different consumers of one user seed never collide.
pub mod domain {
    pub const DROPOUT: u64 = 1;
    pub const TRAIN_DROPOUT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const INIT: u64 = 4;
    pub const RANDOM_ACQUISITION: u64 = 5;
    pub const SYNTH: u64 = 6;
    pub const EVAL_DROPOUT: u64 = 7;
}
