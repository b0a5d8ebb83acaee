//! Deterministic RNG streams.
//!
//! Every stochastic component (each environment, the policy sampler, the
//! minibatch shuffler, weight init) gets its own ChaCha8 stream derived from
//! the master seed and a stream label, so the training loop is reproducible
//! regardless of how many envs run or in which order components draw.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives an independent ChaCha8 stream from `(seed, label)`.
///
/// Uses an FNV-1a mix of the label so distinct labels give uncorrelated
/// streams even for adjacent seeds.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Stream for the `i`-th member of a labelled family (e.g. one per env).
pub fn indexed_stream(seed: u64, label: &str, index: usize) -> ChaCha8Rng {
    stream(seed.wrapping_add((index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)), label)
}
