use super::{top_k_hits, IndexError, ScoredHit};
use crate::chunking::Chunk;
use crate::embedding::{cosine, embed_texts, EmbeddingProvider, EmbeddingVector, VectorError};
use crate::exec::Execution;

/// Exact brute-force cosine index. Rows are stored as `f32`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    chunks: Vec<Chunk>,
    vectors: Vec<f32>,
    dimension: usize,
    provider_name: String,
    degenerate: Vec<bool>,
}

impl VectorIndex {
    pub fn build(chunks: Vec<Chunk>, provider: &dyn EmbeddingProvider) -> Result<Self, IndexError> {
        if chunks.is_empty() {
            return Err(IndexError::EmptyChunks);
        }
        let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
        let embedded = embed_texts(provider, &texts)?;
        let dimension = provider.dimension();
        let mut vectors = Vec::with_capacity(chunks.len() * dimension);
        for v in &embedded {
            vectors.extend(v.to_f32());
        }
        Self::from_parts(chunks, vectors, dimension, provider.name().to_string())
    }

    pub fn from_parts(
        chunks: Vec<Chunk>,
        vectors: Vec<f32>,
        dimension: usize,
        provider_name: String,
    ) -> Result<Self, IndexError> {
        if dimension == 0 {
            return Err(IndexError::CorruptIndex("dimension must be positive".into()));
        }
        if vectors.len() != chunks.len() * dimension {
            return Err(IndexError::CorruptIndex(format!(
                "{} values cannot form {} rows of dimension {dimension}",
                vectors.len(),
                chunks.len()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(IndexError::CorruptIndex("non-finite vector entry".into()));
        }
        let degenerate = vectors
            .chunks_exact(dimension)
            .map(|row| row.iter().all(|&x| x == 0.0))
            .collect();
        Ok(Self {
            chunks,
            vectors,
            dimension,
            provider_name,
            degenerate,
        })
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn provider_name(&self) -> &str {
        &self.provider_name
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Rows with an all-zero vector never appear in rankings.
    pub fn is_degenerate(&self, i: usize) -> bool {
        self.degenerate[i]
    }

    pub fn topk(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<ScoredHit>, IndexError> {
        self.topk_with(query, k, Execution::default())
    }

    /// The `k` rows with the highest cosine to `query`, ties by chunk id.
    pub fn topk_with(
        &self,
        query: &EmbeddingVector,
        k: usize,
        exec: Execution,
    ) -> Result<Vec<ScoredHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        if query.dimension() != self.dimension {
            return Err(VectorError::DimensionMismatch {
                left: query.dimension(),
                right: self.dimension,
            }
            .into());
        }
        let q = query.to_f32();
        if q.iter().all(|&x| x == 0.0) {
            return Err(VectorError::ZeroVector.into());
        }
        let scores = exec.map_indexed(self.len(), |i| {
            if self.degenerate[i] {
                None
            } else {
                cosine(&q, self.row(i)).ok().map(|s| (i, s))
            }
        });
        let candidates = scores.into_iter().flatten().collect();
        Ok(top_k_hits(candidates, k, |i| self.chunks[i].chunk_id.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunking::count_tokens;
    use crate::embedding::{hash_embed, HashEmbedder};

    fn chunk(id: &str, text: &str) -> Chunk {
        Chunk {
            chunk_id: id.into(),
            doc_id: "d".into(),
            ordinal: 0,
            char_start: 0,
            char_end: text.chars().count(),
            token_count: count_tokens(text),
            text: text.into(),
        }
    }

    fn manual(rows: &[&[f32]]) -> VectorIndex {
        let chunks = (0..rows.len()).map(|i| chunk(&format!("c{i}"), "x")).collect();
        let dim = rows[0].len();
        VectorIndex::from_parts(chunks, rows.concat(), dim, "manual".into()).unwrap()
    }

    #[test]
    fn rows_match_hash_embed() {
        let texts = ["fixar", "lavar", "corar", "montar", "secar"];
        let chunks: Vec<_> = texts.iter().enumerate().map(|(i, t)| chunk(&format!("c{i}"), t)).collect();
        let provider = HashEmbedder::new(64, 3);
        let index = VectorIndex::build(chunks, &provider).unwrap();
        assert_eq!(index.len(), 5);
        for (i, t) in texts.iter().enumerate() {
            assert_eq!(index.row(i), hash_embed(t, 64, 3).to_f32().as_slice());
        }
    }

    #[test]
    fn k_exceeds_size_and_self_similarity() {
        let provider = HashEmbedder::new(32, 0);
        let index = VectorIndex::build(vec![chunk("only", "lâmina corada")], &provider).unwrap();
        let q = hash_embed("lâmina corada", 32, 0);
        let hits = index.topk(&q, 3).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].chunk_id, "only");
        assert!((hits[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_order() {
        // Query e0; rows chosen with cosines 0.9, 0.5 and 0.1 to e0.
        let row = |c: f32| [c, (1.0 - c * c).sqrt()];
        let index = manual(&[&row(0.1), &row(0.9), &row(0.5)]);
        let hits = index.topk(&EmbeddingVector::new(vec![1.0, 0.0]), 2).unwrap();
        assert_eq!(hits.iter().map(|h| h.chunk_id.as_str()).collect::<Vec<_>>(), vec!["c1", "c2"]);
        assert!((hits[0].score - 0.9).abs() < 1e-6);
        assert!((hits[1].score - 0.5).abs() < 1e-6);
    }

    #[test]
    fn zero_query_and_degenerate_rows() {
        let index = manual(&[&[0.0, 0.0], &[1.0, 0.0]]);
        assert!(index.is_degenerate(0));
        assert!(matches!(
            index.topk(&EmbeddingVector::new(vec![0.0, 0.0]), 1),
            Err(IndexError::Vector(VectorError::ZeroVector))
        ));
        let hits = index.topk(&EmbeddingVector::new(vec![1.0, 1.0]), 5).unwrap();
        assert_eq!(hits.len(), 1);
        assert!(matches!(index.topk(&EmbeddingVector::new(vec![1.0]), 1), Err(IndexError::Vector(_))));
        assert!(matches!(index.topk(&EmbeddingVector::new(vec![1.0, 0.0]), 0), Err(IndexError::InvalidK)));
    }

    #[test]
    fn rebuild_is_bit_identical() {
        let chunks: Vec<_> = (0..20).map(|i| chunk(&format!("c{i}"), &format!("passo {i} da coloração"))).collect();
        let p = HashEmbedder::default();
        let a = VectorIndex::build(chunks.clone(), &p).unwrap();
        let b = VectorIndex::build(chunks, &p).unwrap();
        let bytes = |ix: &VectorIndex| ix.vectors().iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>();
        assert_eq!(bytes(&a), bytes(&b));
    }
}
