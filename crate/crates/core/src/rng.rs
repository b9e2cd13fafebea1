//! Seeded random streams.
//!
//! Every random constructor in the crate takes an explicit generator. The
//! helpers here derive independent ChaCha streams from a `(seed, stream)`
//! pair so that parallel trials never share state and results do not depend
//! on worker scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for `seed`, positioned on ChaCha stream `stream`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
