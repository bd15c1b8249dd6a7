//! Counter-based seed splitting.
//!
//! Every random stream in a campaign is derived from the single campaign seed
//! by hashing `(seed, stream, index)` through the SplitMix64 finalizer. Streams
//! are independent of scheduling order, so trial 17 gets the same seed whether
//! it starts first or last.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random source used throughout the crate. ChaCha is value-stable across
/// platforms and `rand` releases.
pub type Rng = ChaCha8Rng;

/// Named stream families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Sampler = 1,
    Trial = 2,
    EnsembleMember = 3,
    Data = 4,
    Augment = 5,
    Curve = 6,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of member `index` of `stream` from the campaign seed.
pub fn derive(seed: u64, stream: Stream, index: u64) -> u64 {
    let a = mix(seed.wrapping_add(GOLDEN));
    let b = mix(a ^ (stream as u64).wrapping_mul(GOLDEN));
    mix(b ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> Rng {
    rng_from(derive(seed, stream, index))
}
