//! Seeded random streams.
//!
//! Every consumer of randomness (agent gradient sampling, agent compression
//! dither, problem generation, measurement) gets its own ChaCha stream keyed
//! by the run seed and a fixed stream id, so the draws of one consumer never
//! depend on how often another one is called.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

pub const PROBLEM_STREAM: u64 = u64::MAX;
pub const METRICS_STREAM: u64 = u64::MAX - 1;
pub const INIT_STREAM: u64 = u64::MAX - 2;
pub const TOPOLOGY_STREAM: u64 = u64::MAX - 3;
pub const LYAPUNOV_STREAM: u64 = u64::MAX - 4;

/// Words reserved per iteration in the Lyapunov stream.
const LYAPUNOV_WORDS_PER_ITER: u128 = 1 << 40;

pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Stream for the frozen batch behind the Lyapunov terms at iteration `k`;
/// depends on `(seed, k)` only.
pub fn lyapunov_stream(seed: u64, k: usize) -> StreamRng {
    let mut rng = stream(seed, LYAPUNOV_STREAM);
    rng.set_word_pos(k as u128 * LYAPUNOV_WORDS_PER_ITER);
    rng
}

/// Stream used by agent `i` for `ξ` and `ζ` draws.
pub fn agent_sampling_stream(seed: u64, agent: usize) -> StreamRng {
    stream(seed, 2 * agent as u64)
}

/// Stream used by agent `i` for compressor dither.
pub fn agent_compression_stream(seed: u64, agent: usize) -> StreamRng {
    stream(seed, 2 * agent as u64 + 1)
}

pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn fill_standard_normal<R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = StandardNormal.sample(rng);
    }
}
