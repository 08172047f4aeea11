//! Seed derivation helpers. Every random draw in the crate goes through a
//! ChaCha8 stream selected here so results depend only on the seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream identifiers, one per consumer.
pub mod stream {
    pub const FEATURE_MASK: u64 = 1;
    pub const LABEL_MASK: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const SYNTH: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SUBSAMPLE: u64 = 6;
}

pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer, used to spread small integers over 64 bits.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// `⌊rate · count⌋`, tolerant of representation error such as `0.29 * 100`.
pub fn floor_fraction(rate: f64, count: usize) -> usize {
    let x = rate * count as f64;
    libm::floor(x + 1e-9 * x.abs().max(1.0)) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_differ() {
        let a: u64 = seeded(7, stream::FEATURE_MASK).gen();
        let b: u64 = seeded(7, stream::LABEL_MASK).gen();
        let c: u64 = seeded(7, stream::FEATURE_MASK).gen();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn floor_fraction_handles_round_off() {
        assert_eq!(floor_fraction(0.29, 100), 29);
        assert_eq!(floor_fraction(0.7, 10), 7);
        assert_eq!(floor_fraction(0.5, 1), 0);
        assert_eq!(floor_fraction(0.0, 10), 0);
    }
}
