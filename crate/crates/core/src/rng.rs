//! Deterministic pseudo-random stream used by the synthetic generator and the
//! dataset splitter.
//!
//! The generator is SplitMix64: a 64-bit Weyl sequence fed through a fixed
//! mixing function. It is small enough to re-implement bit for bit in any
//! language, which is what makes seeded splits and synthetic datasets
//! reproducible outside this crate.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw on the open interval (0, 1), 53 bits of resolution.
    ///
    /// Never returns exactly 0 or 1, so `-ln(u)` is always finite and positive.
    pub fn next_open01(&mut self) -> f64 {
        let bits = self.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Integer in `[0, bound)` by multiply-shift. `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Unit-rate exponential variate.
    pub fn next_exp(&mut self) -> f64 {
        -self.next_open01().ln()
    }
}

/// The SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for sub-stream `stream` of `base`.
pub fn stream_seed(base: u64, stream: u64) -> u64 {
    mix64(base ^ mix64(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}
