//! Seeded randomness. Every sampled quantity draws from a ChaCha8 generator
//! keyed by the user seed, with an independent stream per subsystem so that
//! adding samples in one place never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams, one per consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Growth = 1,
    SupNorm = 2,
    Bmo = 3,
    RandomBoxes = 4,
    Orthogonality = 5,
    Lambda = 6,
    Reflection = 7,
    Corner = 8,
    Tests = 99,
}

/// Generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// A further split of a stream, e.g. one per sweep row.
pub fn substream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mixed = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    stream_rng(mixed, stream)
}
