//! Reproducible random streams.
//!
//! Every stochastic routine in this crate draws from a `(seed, stream)` pair:
//! the seed selects a ChaCha key and the stream id selects an independent
//! substream of that key. Distinct streams of the same seed never overlap, so
//! curves, replicates, and calibration draws can be generated in parallel and
//! still reproduce bit for bit in any execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a child seed from a parent seed and a tag (splitmix64 finalizer).
///
/// For a fixed parent, distinct tags yield distinct children: the finalizer is
/// a bijection on u64, so collisions would require `parent ^ splitmix64(tag)`
/// to coincide, which it cannot for distinct tags.
pub fn mix(parent: u64, tag: u64) -> u64 {
    splitmix64(parent ^ splitmix64(tag))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent reproducible stream for a `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
