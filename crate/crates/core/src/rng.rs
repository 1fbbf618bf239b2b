//! Counter-based random streams.
//!
//! Every standard normal used for quenched disorder is addressed by the triple
//! `(seed, sample_index, bond_index)`. The generator is ChaCha8 keyed by the
//! seed, with the sample index selecting the 64-bit stream and the bond index
//! selecting a fixed two-word slot inside that stream, so any single value can
//! be regenerated without replaying the others.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32-bit words consumed per normal deviate (two `u64` draws).
const WORDS_PER_NORMAL: u128 = 4;

/// Map a `u64` to the open interval `(0, 1)`.
#[inline]
fn open_unit(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Box-Muller on exactly two words, so each slot has a fixed footprint.
#[inline]
fn box_muller(a: u64, b: u64) -> f64 {
    let u1 = open_unit(a);
    let u2 = open_unit(b);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Stream of standard normals for one disorder sample.
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, sample_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample_index);
        rng.set_word_pos(0);
        Self { rng }
    }

    /// Next normal in slot order; the k-th call returns slot k.
    pub fn next_normal(&mut self) -> f64 {
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        box_muller(a, b)
    }

    /// Random access to slot `index`. Leaves the stream positioned after it.
    pub fn normal_at(&mut self, index: u64) -> f64 {
        self.rng.set_word_pos(u128::from(index) * WORDS_PER_NORMAL);
        self.next_normal()
    }
}

/// One-shot lookup of the normal keyed by `(seed, sample_index, index)`.
pub fn keyed_normal(seed: u64, sample_index: u64, index: u64) -> f64 {
    NormalStream::new(seed, sample_index).normal_at(index)
}

/// Generator for a Markov chain, independent of the disorder streams for the
/// same seed because the key is mixed with a domain tag.
pub fn chain_rng(chain_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(chain_seed ^ 0x6d63_2d63_6861_696e));
    rng.set_stream(stream);
    rng
}

/// Derive a child seed from a parent seed and a label. Used to give each model
/// in a multi-model check its own disorder.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    mix64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ h)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_random_access_agree() {
        let mut seq = NormalStream::new(42, 7);
        let values: Vec<f64> = (0..50).map(|_| seq.next_normal()).collect();
        for (k, v) in values.iter().enumerate() {
            assert_eq!(v.to_bits(), keyed_normal(42, 7, k as u64).to_bits());
        }
    }

    #[test]
    fn distinct_keys_give_distinct_values() {
        let a = keyed_normal(1, 0, 0);
        assert_ne!(a, keyed_normal(1, 1, 0));
        assert_ne!(a, keyed_normal(2, 0, 0));
        assert_ne!(a, keyed_normal(1, 0, 1));
    }

    #[test]
    fn normal_moments() {
        let mut s = NormalStream::new(9, 0);
        let n = 200_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.next_normal();
            m1 += z;
            m2 += z * z;
        }
        let mean = m1 / n as f64;
        let var = m2 / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        assert_ne!(derive_seed(5, "long"), derive_seed(5, "dyson"));
        assert_eq!(derive_seed(5, "long"), derive_seed(5, "long"));
    }
}
