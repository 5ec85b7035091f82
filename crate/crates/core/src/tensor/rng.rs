//! Seeded randomness. Every stochastic operation takes an explicit generator
//! derived from a 64-bit seed, so runs are reproducible bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Counter-based ChaCha8 stream generator.
pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An independent stream of `seed`, selected by `stream`.
///
/// Streams of the same seed never overlap, which lets each consumer (weight
/// init, pair sampling, dropout of a given step) draw without disturbing the
/// others.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A stream keyed by a tuple of indices (for example epoch, step, example).
pub fn keyed(seed: u64, key: &[u64]) -> Rng {
    let id = key.iter().fold(0x9e37_79b9_7f4a_7c15u64, |h, &k| splitmix(h ^ k));
    stream(seed, id)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
