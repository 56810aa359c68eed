//! Seeded random streams. Every stochastic quantity is keyed by a
//! `(seed, stream)` pair so Monte Carlo trials can run on any number of
//! workers and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
