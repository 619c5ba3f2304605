//! Deterministic stand-in for pretrained word vectors: each word hashes to
//! a seed, which draws a Gaussian vector.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenEmbedder {
    pub dim: usize,
    pub seed: u64,
}

// 64-bit FNV-1a; stable across platforms and toolchains, unlike std's hasher.
fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl TokenEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }

    /// Vector with entries N(0, 1/dim), so its norm is close to 1.
    pub fn embed_word(&self, word: &str) -> Array1<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(word) ^ self.seed.rotate_left(17));
        let scale = 1.0 / (self.dim as f64).sqrt();
        Array1::from_shape_fn(self.dim, |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
    }

    /// Splits on whitespace, lowercases and strips punctuation.
    pub fn tokenize(text: &str) -> Vec<String> {
        text.split_whitespace()
            .map(|w| w.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect()
    }

    /// One row per token.
    pub fn embed_query(&self, text: &str) -> Result<Array2<f64>> {
        let tokens = Self::tokenize(text);
        if tokens.is_empty() {
            return Err(Error::invalid(format!("query {text:?} has no tokens")));
        }
        let mut out = Array2::zeros((tokens.len(), self.dim));
        for (i, t) in tokens.iter().enumerate() {
            out.row_mut(i).assign(&self.embed_word(t));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_word_same_vector() {
        let e = TokenEmbedder::new(16, 3);
        let q = e.embed_query("The cat, the CAT!").unwrap();
        assert_eq!(q.nrows(), 4);
        assert_eq!(q.row(0), q.row(2));
        assert_eq!(q.row(1), q.row(3));
        assert_ne!(q.row(0), q.row(1));
    }

    #[test]
    fn seed_changes_vectors() {
        assert_ne!(TokenEmbedder::new(8, 0).embed_word("a"), TokenEmbedder::new(8, 1).embed_word("a"));
    }

    #[test]
    fn empty_query_errors() {
        assert!(TokenEmbedder::new(8, 0).embed_query(" ?! ").is_err());
    }
}
