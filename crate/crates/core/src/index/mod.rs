//! Dense (exact cosine) and sparse (BM25) indices over one chunk set.

mod bm25;
mod dense;
mod persist;

use std::cmp::Ordering;
use std::path::PathBuf;

pub use bm25::{Bm25Index, DEFAULT_B, DEFAULT_K1};
pub use dense::VectorIndex;
pub use persist::{load_index, read_manifest, save_index, IndexBundle, Manifest, INDEX_VERSION};

use crate::chunking::ChunkingError;
use crate::embedding::{EmbeddingError, VectorError};

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("cannot index an empty chunk list")]
    EmptyChunks,
    #[error(transparent)]
    Chunking(#[from] ChunkingError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("unknown chunk `{0}`")]
    UnknownChunk(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error("index version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One ranked result. `chunk_index` points into the index's chunk list.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredHit {
    pub chunk_index: usize,
    pub chunk_id: String,
    pub score: f64,
    pub rank: usize,
}

/// Score descending, then chunk id ascending.
pub(crate) fn rank_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

/// Sorts `(chunk_index, score)` candidates, keeps the best `k` and assigns
/// ranks from 1.
pub(crate) fn top_k_hits(
    candidates: Vec<(usize, f64)>,
    k: usize,
    id_of: impl Fn(usize) -> String,
) -> Vec<ScoredHit> {
    let ids: Vec<String> = candidates.iter().map(|&(i, _)| id_of(i)).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    let cmp = |&a: &usize, &b: &usize| rank_order(candidates[a].1, &ids[a], candidates[b].1, &ids[b]);
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    order
        .into_iter()
        .enumerate()
        .map(|(r, i)| ScoredHit {
            chunk_index: candidates[i].0,
            chunk_id: ids[i].clone(),
            score: candidates[i].1,
            rank: r + 1,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_breaks_ties_by_id() {
        let ids = ["c", "a", "b", "d"];
        let hits = top_k_hits(vec![(0, 0.5), (1, 0.5), (2, 0.9), (3, 0.1)], 3, |i| ids[i].to_string());
        let got: Vec<_> = hits.iter().map(|h| (h.chunk_id.as_str(), h.rank)).collect();
        assert_eq!(got, vec![("b", 1), ("a", 2), ("c", 3)]);
    }

    #[test]
    fn top_k_larger_than_candidates() {
        let hits = top_k_hits(vec![(0, 1.0)], 5, |_| "x".into());
        assert_eq!(hits.len(), 1);
        assert!(top_k_hits(Vec::new(), 3, |_| unreachable!()).is_empty());
    }
}
