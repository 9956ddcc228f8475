//! Seeded, stream-addressable randomness.
//!
//! Every stochastic operation draws from `stream_rng(seed, stream)`. ChaCha is
//! counter based, so distinct stream ids give independent sequences and a run
//! is reproducible regardless of how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a tag into a stream id, so unrelated subsystems never collide.
pub fn sub_stream(stream: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = stream ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
