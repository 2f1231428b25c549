//! Deterministic offline embedder: signed feature hashing of tokens.

use super::{EmbeddingError, EmbeddingProvider, EmbeddingVector};
use crate::chunking::tokenize;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeded FNV-1a followed by a splitmix64 finalizer. Stable across platforms
/// and releases, unlike `std`'s `DefaultHasher`.
fn stable_hash(token: &str, seed: u64) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &byte in token.as_bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Hashes each token of `text` to an index in `[0, dimension)` and a sign,
/// accumulates, and L2-normalizes. Text without tokens maps to the zero vector.
pub fn hash_embed(text: &str, dimension: usize, seed: u64) -> EmbeddingVector {
    assert!(dimension >= 1, "dimension must be positive");
    let mut values = vec![0.0f64; dimension];
    for token in tokenize(text) {
        let h = stable_hash(&token, seed);
        let index = (h % dimension as u64) as usize;
        values[index] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    EmbeddingVector::new(values)
}

/// [`hash_embed`] as a provider. Its name encodes dimension and seed, so two
/// differently-seeded hash embedders never pass for one another.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
    seed: u64,
    name: String,
}

impl HashEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension >= 1, "dimension must be positive");
        Self {
            dimension,
            seed,
            name: format!("hash-d{dimension}-s{seed}"),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(384, 0)
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        Ok(texts
            .iter()
            .map(|t| hash_embed(t, self.dimension, self.seed))
            .collect())
    }
}
