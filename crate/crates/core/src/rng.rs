//! Portable random stream used by the dynamics.
//!
//! ChaCha8 seeded through `SeedableRng::seed_from_u64`, whose output is fixed
//! across platforms and releases of `rand_chacha`. Reals are drawn from the top
//! 53 bits of one `u64` and scaled into a half-open interval.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketRng(ChaCha8Rng);

impl MarketRng {
    pub fn from_seed(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; draws again on the rare rounding up to `hi`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        loop {
            let x = lo + (hi - lo) * self.unit();
            if x < hi {
                return x;
            }
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `replicate` at grid point `beta_index`, derived from a
/// base seed by chained SplitMix64 rounds.
pub fn replicate_seed(base: u64, beta_index: usize, replicate: usize) -> u64 {
    mix64(mix64(mix64(base) ^ beta_index as u64) ^ replicate as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_reproducible() {
        let mut a = MarketRng::from_seed(7);
        let mut b = MarketRng::from_seed(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(
            MarketRng::from_seed(7).next_u64(),
            MarketRng::from_seed(8).next_u64()
        );
    }

    #[test]
    fn uniform_stays_half_open() {
        let mut rng = MarketRng::from_seed(1);
        for _ in 0..10_000 {
            let x = rng.uniform(2.0, 5.0);
            assert!((2.0..5.0).contains(&x));
        }
    }

    #[test]
    fn mix64_reference_values() {
        // SplitMix64 outputs for state 0 (first two draws of the generator)
        assert_eq!(mix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(mix64(0x9e37_79b9_7f4a_7c15), 0x6e78_9e6a_a1b9_65f4);
    }

    #[test]
    fn replicate_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for b in 0..16 {
            for r in 0..8 {
                assert!(seen.insert(replicate_seed(42, b, r)));
            }
        }
    }
}
