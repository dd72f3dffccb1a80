//! Reproducible random streams.
//!
//! Every random quantity in a run is drawn from a ChaCha8 stream selected by
//! `(seed, replica, stream)`. ChaCha is counter based, so streams with
//! different ids are independent and a replica can be re-run in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tag of a random stream within one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stream {
    Graph = 1,
    Opinions = 2,
    Dynamics = 3,
    Counters = 4,
    Ame = 5,
    Fixtures = 6,
    Aux = 7,
    /// Second counter pool of the counter construction.
    CountersPrime = 8,
    /// Uniform vertex stream used for rewiring targets in the counter construction.
    Targets = 9,
}

/// The generator for `stream` of replica `replica` under master seed `seed`.
pub fn stream_rng(seed: u64, replica: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replica << 8) | stream as u64);
    rng
}
