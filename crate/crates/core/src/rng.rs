//! Counter-based pseudorandom streams.
//!
//! Every random quantity in this crate is a pure function of
//! `(master seed, stream tag, counter)`. Trajectory `i` of an estimator
//! draws from its own substream, so Monte Carlo results do not depend on
//! how trajectories are scheduled across worker threads.
//!
//! The generator is SplitMix64 evaluated in counter mode: output `j` of a
//! stream with key `k` is `mix64(k + j * GAMMA)`. SplitMix64 passes BigCrush
//! and is more than adequate for Monte Carlo sampling.

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream key from a parent key and a tag.
///
/// Tags are hashed before xoring so that structured tag spaces
/// (0, 1, 2, ...) do not correlate with structured seeds.
#[inline]
pub fn substream(key: u64, tag: u64) -> u64 {
    mix64(key ^ mix64(tag ^ 0xa076_1d64_78bd_642f))
}

/// A counter-based generator: state is (key, position), output is a pure
/// function of both.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { key, counter: 0 }
    }

    /// Stream for trajectory `index` of the estimator stream `key`.
    pub fn for_stream(key: u64, index: u64) -> Self {
        CounterRng::new(substream(key, index))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)));
        self.counter += 1;
        v
    }

    /// Uniform in [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in 0..bound.
    #[inline]
    pub fn next_below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        // Desk-scale bounds are tiny; modulo bias is < bound / 2^64.
        (self.next_u64() % bound as u64) as usize
    }
}
