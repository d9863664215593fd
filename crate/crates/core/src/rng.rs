//! Counter-based, splittable random streams.
//!
//! A stream is identified by `(seed, stream_id)`; the `counter` is the index
//! of the next 64-bit word. The generator is ChaCha8 keyed by the seed with
//! the ChaCha stream parameter set to `stream_id`, so any word can be
//! reached directly from `(seed, stream_id, counter)` and distinct stream ids
//! give non-overlapping sequences.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Offset between a replication's main stream and its auxiliary streams.
/// Auxiliary stream `j` of replication `i` is `i + (j + 1) * AUX_STREAM_STRIDE`.
pub const AUX_STREAM_STRIDE: u64 = 1 << 40;

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream { seed, stream_id, inner }
    }

    /// Stream positioned at an arbitrary word counter.
    pub fn at(seed: u64, stream_id: u64, counter: u64) -> Self {
        let mut s = Self::new(seed, stream_id);
        s.inner.set_word_pos(counter as u128 * 2);
        s
    }

    /// The word at `(seed, stream_id, counter)`, without keeping state.
    pub fn word(seed: u64, stream_id: u64, counter: u64) -> u64 {
        Self::at(seed, stream_id, counter).next_u64()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 64-bit words consumed so far.
    pub fn counter(&self) -> u64 {
        (self.inner.get_word_pos() / 2) as u64
    }

    /// Replication streams for an experiment seeded with `seed`.
    pub fn for_replication(seed: u64, rep: u64) -> Self {
        Self::new(seed, rep)
    }

    /// Auxiliary stream `aux` of this stream's replication.
    pub fn auxiliary(&self, aux: u64) -> Self {
        Self::new(self.seed, self.stream_id.wrapping_add((aux + 1).wrapping_mul(AUX_STREAM_STRIDE)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1) with 53 bits of resolution; one word per call.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        self.inner.random_range(0..n)
    }
}
