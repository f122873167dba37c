//! Deterministic random-number streams.
//!
//! Every stochastic component draws from a ChaCha stream addressed by
//! `(seed, stream id)`. Distinct ids keep consumption in one component from
//! shifting draws in another, so e.g. channel fading is identical across
//! policies evaluated under the same seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Channel fading evolution inside an environment (resets and transitions).
pub const STREAM_ENV_CHANNEL: u64 = 0;
/// Decode Bernoulli draws inside an environment.
pub const STREAM_ENV_DECODE: u64 = 1;
/// Network weight initialization.
pub const STREAM_NET_INIT: u64 = 2;
/// Action sampling during rollout collection.
pub const STREAM_SAMPLE: u64 = 3;
/// Minibatch shuffling inside the update loop.
pub const STREAM_SHUFFLE: u64 = 4;
/// Stochastic baseline policies during evaluation.
pub const STREAM_POLICY: u64 = 5;
/// Instance generation (plants and transition matrices).
pub const STREAM_INSTANCE: u64 = 6;

/// A ChaCha generator for the given seed and stream id.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
