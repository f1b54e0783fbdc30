//! Reproducible random number streams.
//!
//! Every stochastic routine in the crate draws from an [`RngStream`], keyed
//! by `(seed, stream)` with an optional substream counter. The key is derived
//! with a SplitMix64 chain and feeds a ChaCha12 generator, so draw sequences
//! are bit-identical across runs, platforms and thread schedules: parallel
//! code hands each unit of work its own stream id instead of sharing one
//! generator.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
/// Domain constant so that `RngStream::new(0, 0)` is not the all-zero key.
const DOMAIN: u64 = 0xB5AD_4ECE_DA1C_E2A9;

/// SplitMix64 output scrambler (Steele, Lea & Flood's finalizer).
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A seeded, independently keyed random stream.
///
/// Streams with distinct `(seed, stream, substream)` triples are derived from
/// unrelated ChaCha keys; the same triple always reproduces the same draw
/// sequence.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    substream: u64,
    inner: ChaCha12Rng,
}

impl RngStream {
    /// Opens the stream `(seed, stream)`.
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::with_substream(seed, stream, 0)
    }

    /// Opens a stream with an explicit substream counter (used for retry
    /// redraws so they do not replay the original sequence).
    pub fn with_substream(seed: u64, stream: u64, substream: u64) -> Self {
        let mut state = DOMAIN;
        for word in [seed, stream, substream] {
            state = splitmix64(state ^ word.wrapping_mul(GOLDEN)).wrapping_add(GOLDEN);
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN);
            chunk.copy_from_slice(&splitmix64(state).to_le_bytes());
        }
        RngStream {
            seed,
            stream,
            substream,
            inner: ChaCha12Rng::from_seed(key),
        }
    }

    /// Derives the `k`-th sibling of this stream (fresh key, independent of
    /// how much of `self` has been consumed). Substream 0 is the stream
    /// itself as first opened.
    pub fn substream(&self, k: u64) -> Self {
        Self::with_substream(self.seed, self.stream, k)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn substream_index(&self) -> u64 {
        self.substream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn take(mut rng: RngStream, n: usize) -> Vec<u64> {
        (0..n).map(|_| rng.next_u64()).collect()
    }

    #[test]
    fn same_key_reproduces_bit_identical_sequence() {
        let a = take(RngStream::new(42, 7), 64);
        let b = take(RngStream::new(42, 7), 64);
        assert_eq!(a, b, "identical (seed, stream) must replay exactly");
    }

    #[test]
    fn distinct_streams_and_seeds_diverge() {
        let base = take(RngStream::new(42, 7), 16);
        assert_ne!(base, take(RngStream::new(42, 8), 16));
        assert_ne!(base, take(RngStream::new(43, 7), 16));
        assert_ne!(
            base,
            take(RngStream::new(7, 42), 16),
            "seed/stream roles must not commute"
        );
    }

    #[test]
    fn substreams_are_fresh_and_reproducible() {
        let parent = RngStream::new(9, 3);
        let s1 = take(parent.substream(1), 16);
        let s1_again = take(parent.substream(1), 16);
        assert_eq!(s1, s1_again);
        assert_ne!(s1, take(parent.substream(2), 16));
        assert_ne!(
            s1,
            take(parent.clone(), 16),
            "substream 1 must differ from the parent"
        );
        // substream(0) re-opens the parent stream from the start
        assert_eq!(take(parent.substream(0), 16), take(parent, 16));
    }

    #[test]
    fn clone_continues_identically() {
        let mut rng = RngStream::new(1, 1);
        rng.next_u64();
        let cloned = rng.clone();
        assert_eq!(take(rng, 32), take(cloned, 32));
    }
}
