//! Named random streams derived from one master seed.
//!
//! ChaCha is a counter-based stream cipher, so distinct stream ids under the
//! same key yield independent sequences by construction. Each party of a run
//! (environment, agent, attacker, initial-state draw) gets its own stream, so
//! adding randomness to one party never perturbs the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

const STREAM_ENVIRONMENT: u64 = 0;
const STREAM_AGENT: u64 = 1;
const STREAM_ATTACKER: u64 = 2;
const STREAM_INITIAL_STATE: u64 = 3;

/// The four independent streams of an experiment run.
pub struct RngStreams {
    pub environment: Stream,
    pub agent: Stream,
    pub attacker: Stream,
    pub initial_state: Stream,
}

impl RngStreams {
    pub fn new(master_seed: u64) -> Self {
        Self {
            environment: stream(master_seed, STREAM_ENVIRONMENT),
            agent: stream(master_seed, STREAM_AGENT),
            attacker: stream(master_seed, STREAM_ATTACKER),
            initial_state: stream(master_seed, STREAM_INITIAL_STATE),
        }
    }
}

/// A single counter-based stream for (master seed, stream id).
pub fn stream(master_seed: u64, stream_id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}
