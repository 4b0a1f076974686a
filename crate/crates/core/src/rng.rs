//! Seed derivation.
//!
//! Every randomized operation takes an explicit `u64` seed. Independent
//! sub-streams are derived from `(seed, purpose tag, index)`: the seed and tag
//! are mixed into a ChaCha8 key and the index selects the ChaCha stream. Two
//! calls with the same triple always produce the same sequence, no matter which
//! thread runs them or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed for a named purpose. Useful when a sub-operation
/// itself takes a seed rather than a generator.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    mix(mix(seed ^ fnv1a(tag)) ^ mix(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// Opens the generator for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: &str, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ fnv1a(tag)));
    rng.set_stream(index);
    rng
}
