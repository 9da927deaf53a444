//! Offline embedding provider: hashed character n-grams.

use super::{BackendError, EmbeddingProvider};

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Maps each character n-gram to `fnv1a(ngram) % dim`, counts, and
/// unit-normalizes. Texts shorter than `n` contribute one gram.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dim: usize,
    pub n: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dim: 1024, n: 3 }
    }
}

impl HashingEmbedder {
    pub fn new(dim: usize, n: usize) -> Self {
        assert!(dim > 0 && n > 0, "dimension and n-gram size must be positive");
        Self { dim, n }
    }

    /// Bucket index of every n-gram in `text`, in order.
    pub fn buckets(&self, text: &str) -> Vec<usize> {
        let chars: Vec<char> = text.chars().collect();
        if chars.is_empty() {
            return Vec::new();
        }
        let width = self.n.min(chars.len());
        chars
            .windows(width)
            .map(|w| {
                let gram: String = w.iter().collect();
                (fnv1a(gram.as_bytes()) % self.dim as u64) as usize
            })
            .collect()
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for b in self.buckets(text) {
            v[b] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}
