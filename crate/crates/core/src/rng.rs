//! Reproducible random streams.
//!
//! Every stochastic entity (weight initializer, stimulus planner, each
//! spike generator) owns a ChaCha stream whose key is a pure function of
//! `(master seed, entity kind, entity index)`. Per-step generator draws
//! additionally address the stream by a counter instead of consuming
//! sequential state, so results never depend on how many draws other
//! entities made or on the order entities are evaluated in.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Namespaces for derived streams. The discriminant is part of the key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamKind {
    /// Weight-matrix initialization draws.
    Weights = 1,
    /// Stimulus plan construction (target sets, per-trial choices).
    StimulusPlan = 2,
    /// Per-step Bernoulli draws of an input generator.
    InputGenerator = 3,
    /// Per-step Bernoulli draws of the noise generator.
    NoiseGenerator = 4,
    /// Target sampling for the noise generator.
    NoiseTargets = 5,
}

/// A derived 256-bit stream key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamKey([u8; 32]);

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the key for `(master_seed, kind, index)`.
pub fn derive_key(master_seed: u64, kind: StreamKind, index: u64) -> StreamKey {
    let mut state = master_seed;
    state ^= splitmix64(&mut state).wrapping_add(kind as u64);
    state ^= splitmix64(&mut state).wrapping_add(index);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    StreamKey(key)
}

/// A sequential stream for build-time sampling.
pub fn stream(key: StreamKey) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(key.0)
}

/// The `counter`-th u64 of the stream, independent of any other draw.
pub fn draw_at(key: &StreamKey, counter: u64) -> u64 {
    let mut rng = ChaCha8Rng::from_seed(key.0);
    // Two 32-bit words per u64 draw.
    rng.set_word_pos((counter as u128) << 1);
    rng.next_u64()
}

/// Counter-addressed uniform draw in [0, 1).
pub fn uniform_at(key: &StreamKey, counter: u64) -> f64 {
    (draw_at(key, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
