//! SplitMix64 and the per-index stream derivation.
//!
//! The generator is pinned (rather than taken from a library default) so a
//! codebook is a pure function of its seed on every platform and in every
//! language that reimplements these few lines.

pub const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// The SplitMix64 output function (two xor-shift-multiply rounds).
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `next_u64() mod bound`.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        self.next_u64() % bound
    }
}

/// Independent stream number `index` of `seed`:
/// SplitMix64 seeded with `mix64(seed ^ GOLDEN_GAMMA * (index + 1))`.
pub fn stream(seed: u64, index: u64) -> SplitMix64 {
    SplitMix64::new(mix64(
        seed ^ GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1)),
    ))
}
