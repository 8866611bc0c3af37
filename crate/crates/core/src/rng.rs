//! Keyed random streams.
//!
//! Every replicate draws from its own ChaCha stream selected by
//! `(master_seed, replicate_id)`; draws within a replicate are consumed in a
//! fixed order. Output therefore does not depend on how replicates are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// The generator for replicate `replicate` of a batch keyed by `master_seed`.
pub fn replicate_stream(master_seed: u64, replicate: u64) -> StreamRng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}
