//! Seed derivation. Every random stream in the crate is keyed by a base seed
//! plus a tag path, so results never depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed from `seed` and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix(splitmix(seed) ^ tag.wrapping_mul(GOLDEN).rotate_left(17))
}

/// ChaCha8 generator on stream `stream` of key `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// tags for the top-level stages of a run
pub(crate) const TAG_SYMBOLS: u64 = 1;
pub(crate) const TAG_DURATIONS: u64 = 2;
pub(crate) const TAG_CHANNEL: u64 = 3;
pub(crate) const TAG_NOISE: u64 = 4;
pub(crate) const TAG_SYNC_ERROR: u64 = 5;
