//! Query-time strategies: naive dense top-k, threshold rerank, and weighted
//! reciprocal-rank fusion of dense and BM25 rankings.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chunking::Chunk;
use crate::embedding::{embed_one, EmbeddingError, EmbeddingProvider, VectorError};
use crate::exec::Execution;
use crate::index::{top_k_hits, Bm25Index, IndexError, ScoredHit, VectorIndex};

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("index was built with `{index}` but the query provider is `{query}`")]
    ProviderMismatch { index: String, query: String },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Index(IndexError),
    #[error("invalid retrieval config: {0}")]
    InvalidConfig(String),
    #[error("dense and sparse indices cover different chunk sets")]
    IndexMismatch,
}

impl From<IndexError> for RetrievalError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::Embedding(e) => Self::Embedding(e),
            IndexError::Vector(e) => Self::Vector(e),
            other => Self::Index(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Naive,
    Rerank,
    Hybrid,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Naive, Strategy::Rerank, Strategy::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::Rerank => "rerank",
            Self::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown strategy `{0}` (expected naive, rerank or hybrid)")]
pub struct UnknownStrategy(pub String);

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub strategy: Strategy,
    pub k: usize,
    pub rerank_threshold: f64,
    pub dense_weight: f64,
    pub sparse_weight: f64,
    pub fusion_constant: f64,
    /// Candidates drawn from each ranking before filtering or fusion.
    /// `None` means `max(4k, 20)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_pool: Option<usize>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Hybrid,
            k: 3,
            rerank_threshold: 0.40,
            dense_weight: 0.3,
            sparse_weight: 0.7,
            fusion_constant: 60.0,
            candidate_pool: None,
        }
    }
}

impl RetrievalConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }

    pub fn pool(&self) -> usize {
        self.candidate_pool.unwrap_or((4 * self.k).max(20))
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        let bad = |m: String| Err(RetrievalError::InvalidConfig(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.candidate_pool == Some(0) {
            return bad("candidate_pool must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.rerank_threshold) {
            return bad(format!("rerank_threshold {} outside [0, 1]", self.rerank_threshold));
        }
        if self.dense_weight < 0.0 || self.sparse_weight < 0.0 {
            return bad("fusion weights must be non-negative".into());
        }
        if (self.dense_weight + self.sparse_weight - 1.0).abs() > 1e-9 {
            return bad(format!(
                "dense_weight + sparse_weight must be 1, got {} + {}",
                self.dense_weight, self.sparse_weight
            ));
        }
        if self.fusion_constant.is_nan() || self.fusion_constant <= 0.0 {
            return bad(format!("fusion_constant must be positive, got {}", self.fusion_constant));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedChunk {
    pub hit: ScoredHit,
    pub chunk: Chunk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub query: String,
    pub strategy: Strategy,
    pub hits: Vec<RetrievedChunk>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RetrievalResult {
    pub fn chunk_ids(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.hit.chunk_id.as_str()).collect()
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn check_provider(index: &VectorIndex, provider: &dyn EmbeddingProvider) -> Result<(), RetrievalError> {
    if index.provider_name() != provider.name() {
        return Err(RetrievalError::ProviderMismatch {
            index: index.provider_name().to_string(),
            query: provider.name().to_string(),
        });
    }
    Ok(())
}

fn resolve(index: &VectorIndex, hits: Vec<ScoredHit>) -> Vec<RetrievedChunk> {
    hits.into_iter()
        .map(|hit| RetrievedChunk {
            chunk: index.chunks()[hit.chunk_index].clone(),
            hit,
        })
        .collect()
}

/// Embeds the query and returns the dense candidate list of size `n`.
fn dense_candidates(
    query: &str,
    index: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    n: usize,
    exec: Execution,
    timings: &mut BTreeMap<String, f64>,
) -> Result<Vec<ScoredHit>, RetrievalError> {
    check_provider(index, provider)?;
    let t = Instant::now();
    let q = embed_one(provider, query)?;
    timings.insert("embed".into(), elapsed_ms(t));
    let t = Instant::now();
    let hits = index.topk_with(&q, n, exec)?;
    timings.insert("dense".into(), elapsed_ms(t));
    Ok(hits)
}

pub fn retrieve_naive(
    query: &str,
    index: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    k: usize,
) -> Result<RetrievalResult, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidConfig("k must be at least 1".into()));
    }
    let mut timings = BTreeMap::new();
    let hits = dense_candidates(query, index, provider, k, Execution::default(), &mut timings)?;
    Ok(RetrievalResult {
        query: query.to_string(),
        strategy: Strategy::Naive,
        hits: resolve(index, hits),
        timings_ms: timings,
    })
}

/// Keeps the dense candidates whose cosine strictly exceeds `threshold`.
/// An empty result is a valid outcome, not an error.
pub fn retrieve_rerank(
    query: &str,
    index: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    k: usize,
    threshold: f64,
    candidate_pool: usize,
) -> Result<RetrievalResult, RetrievalError> {
    if k == 0 || candidate_pool == 0 {
        return Err(RetrievalError::InvalidConfig("k and candidate_pool must be at least 1".into()));
    }
    let mut timings = BTreeMap::new();
    let candidates = dense_candidates(query, index, provider, candidate_pool, Execution::default(), &mut timings)?;
    let hits = filter_above(candidates, threshold, k);
    Ok(RetrievalResult {
        query: query.to_string(),
        strategy: Strategy::Rerank,
        hits: resolve(index, hits),
        timings_ms: timings,
    })
}

/// Keeps hits scoring strictly above `threshold`, at most `k` of them.
pub fn filter_above(hits: Vec<ScoredHit>, threshold: f64, k: usize) -> Vec<ScoredHit> {
    hits.into_iter()
        .filter(|h| h.score > threshold)
        .take(k)
        .enumerate()
        .map(|(i, h)| ScoredHit { rank: i + 1, ..h })
        .collect()
}

/// Weighted reciprocal-rank fusion.
///
/// `score(c) = w_dense / (C + rank_dense(c)) + w_sparse / (C + rank_sparse(c))`,
/// where a list that does not contain `c` contributes nothing. Chunks whose
/// fused score is zero (present only in a zero-weight list) are dropped.
/// Result is the best `k`, ties by chunk id.
pub fn fuse_rankings(
    dense: &[ScoredHit],
    sparse: &[ScoredHit],
    dense_weight: f64,
    sparse_weight: f64,
    fusion_constant: f64,
    k: usize,
) -> Vec<ScoredHit> {
    let mut fused: BTreeMap<usize, f64> = BTreeMap::new();
    let mut ids: HashMap<usize, &str> = HashMap::new();
    for (list, weight) in [(dense, dense_weight), (sparse, sparse_weight)] {
        for hit in list {
            *fused.entry(hit.chunk_index).or_default() += weight / (fusion_constant + hit.rank as f64);
            ids.insert(hit.chunk_index, &hit.chunk_id);
        }
    }
    let candidates = fused.into_iter().filter(|&(_, s)| s > 0.0).collect();
    top_k_hits(candidates, k, |i| ids[&i].to_string())
}

pub fn retrieve_hybrid(
    query: &str,
    vindex: &VectorIndex,
    bindex: &Bm25Index,
    provider: &dyn EmbeddingProvider,
    config: &RetrievalConfig,
) -> Result<RetrievalResult, RetrievalError> {
    retrieve_hybrid_with(query, vindex, bindex, provider, config, Execution::default())
}

pub fn retrieve_hybrid_with(
    query: &str,
    vindex: &VectorIndex,
    bindex: &Bm25Index,
    provider: &dyn EmbeddingProvider,
    config: &RetrievalConfig,
    exec: Execution,
) -> Result<RetrievalResult, RetrievalError> {
    config.validate()?;
    if vindex.len() != bindex.num_chunks() {
        return Err(RetrievalError::IndexMismatch);
    }
    let pool = config.pool();
    let (dense, sparse) = exec.join(
        || {
            let mut timings = BTreeMap::new();
            dense_candidates(query, vindex, provider, pool, exec, &mut timings).map(|h| (h, timings))
        },
        || {
            let t = Instant::now();
            bindex.topk(query, pool).map(|h| (h, elapsed_ms(t)))
        },
    );
    let (dense, mut timings) = dense?;
    let (sparse, sparse_ms) = sparse?;
    timings.insert("sparse".into(), sparse_ms);
    let t = Instant::now();
    let hits = fuse_rankings(
        &dense,
        &sparse,
        config.dense_weight,
        config.sparse_weight,
        config.fusion_constant,
        config.k,
    );
    timings.insert("fuse".into(), elapsed_ms(t));
    Ok(RetrievalResult {
        query: query.to_string(),
        strategy: Strategy::Hybrid,
        hits: resolve(vindex, hits),
        timings_ms: timings,
    })
}

/// Runs whichever strategy `config` names.
pub fn retrieve(
    query: &str,
    vindex: &VectorIndex,
    bindex: &Bm25Index,
    provider: &dyn EmbeddingProvider,
    config: &RetrievalConfig,
) -> Result<RetrievalResult, RetrievalError> {
    config.validate()?;
    match config.strategy {
        Strategy::Naive => retrieve_naive(query, vindex, provider, config.k),
        Strategy::Rerank => retrieve_rerank(
            query,
            vindex,
            provider,
            config.k,
            config.rerank_threshold,
            config.pool(),
        ),
        Strategy::Hybrid => retrieve_hybrid(query, vindex, bindex, provider, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunking::count_tokens;
    use crate::embedding::HashEmbedder;

    fn hit(i: usize, rank: usize) -> ScoredHit {
        ScoredHit {
            chunk_index: i,
            chunk_id: format!("c{i:02}"),
            score: 1.0 / rank as f64,
            rank,
        }
    }

    fn chunks(texts: &[&str]) -> Vec<Chunk> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Chunk {
                chunk_id: format!("c{i:02}"),
                doc_id: "d".into(),
                ordinal: i,
                char_start: 0,
                char_end: t.chars().count(),
                token_count: count_tokens(t),
                text: t.to_string(),
            })
            .collect()
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("teleport".parse::<Strategy>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(RetrievalConfig::default().validate().is_ok());
        assert_eq!(RetrievalConfig::default().pool(), 20);
        let c = RetrievalConfig { k: 8, ..Default::default() };
        assert_eq!(c.pool(), 32);
        let c = RetrievalConfig { dense_weight: 0.5, ..Default::default() };
        assert!(c.validate().is_err());
        let c = RetrievalConfig { fusion_constant: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = RetrievalConfig { rerank_threshold: 1.5, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn rank_one_in_both_lists() {
        let dense = vec![hit(7, 1), hit(2, 2), hit(3, 3)];
        let sparse = vec![hit(7, 1), hit(4, 2)];
        let fused = fuse_rankings(&dense, &sparse, 0.3, 0.7, 60.0, 5);
        assert_eq!(fused[0].chunk_index, 7);
        assert!((fused[0].score - 1.0 / 61.0).abs() < 1e-15);
        assert!((fused[0].score - 0.016393).abs() < 1e-6);
    }

    #[test]
    fn sparse_weight_dominates_single_list_winners() {
        let fused = fuse_rankings(&[hit(1, 1)], &[hit(2, 1)], 0.3, 0.7, 60.0, 2);
        assert_eq!(fused[0].chunk_index, 2);
        assert_eq!(fused[1].chunk_index, 1);
    }

    #[test]
    fn no_sparse_matches_falls_back_to_dense_order() {
        let dense = vec![hit(5, 1), hit(1, 2), hit(9, 3)];
        let fused = fuse_rankings(&dense, &[], 0.3, 0.7, 60.0, 3);
        assert_eq!(fused.iter().map(|h| h.chunk_index).collect::<Vec<_>>(), vec![5, 1, 9]);
    }

    #[test]
    fn rerank_is_strict() {
        let mk = |i, s| ScoredHit { chunk_index: i, chunk_id: format!("c{i}"), score: s, rank: i + 1 };
        let kept = filter_above(vec![mk(0, 0.9), mk(1, 0.45), mk(2, 0.40), mk(3, 0.39)], 0.40, 3);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept.iter().map(|h| h.rank).collect::<Vec<_>>(), vec![1, 2]);
        assert!(filter_above(vec![mk(0, 0.40), mk(1, 0.1)], 0.40, 3).is_empty());
    }

    #[test]
    fn naive_and_mismatch() {
        let provider = HashEmbedder::new(64, 0);
        let c = chunks(&["corar com eosina", "cortar no micrótomo"]);
        let vindex = VectorIndex::build(c, &provider).unwrap();
        let r = retrieve_naive("cortar no micrótomo", &vindex, &provider, 3).unwrap();
        assert_eq!(r.hits.len(), 2);
        assert_eq!(r.hits[0].chunk.text, "cortar no micrótomo");
        assert!((r.hits[0].hit.score - 1.0).abs() < 1e-9);

        let other = HashEmbedder::new(64, 1);
        assert!(matches!(
            retrieve_naive("x", &vindex, &other, 3),
            Err(RetrievalError::ProviderMismatch { .. })
        ));
        assert!(matches!(
            retrieve_naive("   ", &vindex, &provider, 3),
            Err(RetrievalError::Embedding(EmbeddingError::EmptyInput)) | Err(RetrievalError::Vector(VectorError::ZeroVector))
        ));
        assert!(matches!(
            retrieve_naive("?", &vindex, &provider, 0),
            Err(RetrievalError::InvalidConfig(_))
        ));
    }

    #[test]
    fn hybrid_keyword_anchor() {
        let provider = HashEmbedder::new(64, 0);
        let c = chunks(&[
            "calibração do micrótomo rotativo",
            "ajuste da navalha",
            "coloração de rotina",
        ]);
        let vindex = VectorIndex::build(c.clone(), &provider).unwrap();
        let bindex = Bm25Index::build(&c).unwrap();
        let cfg = RetrievalConfig { k: 1, ..Default::default() };
        let r = retrieve_hybrid("micrótomo", &vindex, &bindex, &provider, &cfg).unwrap();
        assert_eq!(r.chunk_ids(), vec!["c00"]);
        assert!(r.timings_ms.contains_key("sparse"));
    }
}
