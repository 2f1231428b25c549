//! Text embedding behind a provider contract, plus the vector math shared by
//! chunking, retrieval and evaluation.
//!
//! Provider output is kept in `f64`; the dense index stores rows as `f32`.
//! All dot products and norms accumulate in `f64`.

mod hash;
mod http;

pub use hash::{hash_embed, HashEmbedder};
pub use http::{HttpEmbedder, HttpEmbedderConfig};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("embedding failure: {0}")]
    Failure(String),
    #[error("embedding input must be a non-empty list of non-empty texts")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VectorError {
    #[error("vector dimensions differ ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
}

/// A fixed-dimension embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&v| v as f32).collect()
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Text-to-vector model contract.
///
/// `embed_batch` must return one vector per input text, in input order, each
/// of `dimension()` entries. Use [`embed_texts`] rather than calling it
/// directly: it validates both the inputs and the provider's answer.
pub trait EmbeddingProvider: Send + Sync {
    /// Identity of the model; indices remember it so queries can be checked
    /// against the model that built them.
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;
}

pub fn embed_texts(
    provider: &dyn EmbeddingProvider,
    texts: &[&str],
) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    if texts.is_empty() || texts.iter().any(|t| t.is_empty()) {
        return Err(EmbeddingError::EmptyInput);
    }
    let vectors = provider.embed_batch(texts)?;
    if vectors.len() != texts.len() {
        return Err(EmbeddingError::Failure(format!(
            "{} returned {} vectors for {} texts",
            provider.name(),
            vectors.len(),
            texts.len()
        )));
    }
    let dim = provider.dimension();
    for (i, v) in vectors.iter().enumerate() {
        if v.dimension() != dim {
            return Err(EmbeddingError::Failure(format!(
                "{} returned a vector of dimension {} at position {i}, expected {dim}",
                provider.name(),
                v.dimension()
            )));
        }
        if v.values().iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::Failure(format!(
                "{} returned a non-finite value at position {i}",
                provider.name()
            )));
        }
    }
    Ok(vectors)
}

pub fn embed_one(
    provider: &dyn EmbeddingProvider,
    text: &str,
) -> Result<EmbeddingVector, EmbeddingError> {
    Ok(embed_texts(provider, &[text])?.remove(0))
}

/// Cosine of the angle between `a` and `b`: `(a·b) / (‖a‖‖b‖)`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, VectorError> {
    cosine(a.values(), b.values())
}

pub(crate) fn cosine<A, B>(a: &[A], b: &[B]) -> Result<f64, VectorError>
where
    A: Copy + Into<f64>,
    B: Copy + Into<f64>,
{
    if a.len() != b.len() {
        return Err(VectorError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y): (f64, f64) = (x.into(), y.into());
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(VectorError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}
