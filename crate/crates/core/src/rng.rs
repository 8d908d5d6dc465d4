//! Counter-based random streams.
//!
//! Every stream is addressed by a seed plus a short tuple of integer
//! coordinates (a reveal time, a replication index, ...), so draws can be
//! regenerated in any order and from any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes `seed` together with `words` into a single 64-bit key.
pub fn mix(seed: u64, words: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ 0x6D6D_6665_5F72_6E67);
    for &w in words {
        h = splitmix64(h ^ splitmix64(w));
    }
    h
}

/// Independent generator for the coordinate tuple `words` under `seed`.
pub fn stream(seed: u64, words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, words))
}

// Domain tags keep streams of different subsystems apart.
pub(crate) const TAG_EPSILON: u64 = 1;
pub(crate) const TAG_REPLICATION: u64 = 2;
