//! Seeded random streams.
//!
//! Every source of randomness is derived from one user seed through a named
//! sub-stream, so that e.g. changing how many dropout masks are drawn never
//! perturbs parameter initialization or batch shuffling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named sub-streams of the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Data = 1,
    Init = 2,
    PrototypeInit = 3,
    Shuffle = 4,
    Dropout = 5,
    PrototypeDropout = 6,
}

/// Deterministic generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
