//! Seed derivation.
//!
//! Every random quantity in an episode draws from its own ChaCha stream keyed
//! by `(episode seed, stream id)`, so results do not depend on the order in
//! which links or users are visited, nor on how episodes are scheduled across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_PLACEMENT: u64 = 0;
pub const STREAM_BLOCKAGE: u64 = 1 << 20;
pub const STREAM_FADING: u64 = 2 << 20;
pub const STREAM_ARRIVALS: u64 = 3 << 20;

/// Generator for stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer; used to derive per-run seeds from a master seed.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of Monte-Carlo run `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master ^ mix(index))
}
