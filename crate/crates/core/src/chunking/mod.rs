//! Document segmentation: recursive length-bounded splitting with token
//! overlap, and semantic splitting at embedding-distance outliers.

mod recursive;
mod semantic;
mod sentences;
mod tokenizer;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use recursive::chunk_recursive;
pub use semantic::{chunk_semantic, percentile};
pub use sentences::{split_sentences, Sentence};
pub(crate) use sentences::sentence_byte_spans;
pub use tokenizer::{count_tokens, is_content_token, token_spans, tokenize};

use crate::corpus::{Corpus, Document};
use crate::embedding::{EmbeddingError, EmbeddingProvider};
use crate::exec::Execution;

#[derive(Debug, thiserror::Error)]
pub enum ChunkingError {
    #[error("invalid chunking config: {0}")]
    InvalidConfig(String),
    #[error("semantic chunking needs an embedding provider")]
    MissingEmbedder,
    #[error("document {doc_id}: {source}")]
    Embedding {
        doc_id: String,
        #[source]
        source: EmbeddingError,
    },
}

/// A contiguous span of one document. Offsets count characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub ordinal: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub token_count: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum ChunkingConfig {
    Recursive {
        target_tokens: usize,
        overlap_tokens: usize,
    },
    Semantic {
        #[serde(default = "default_min_chunk_tokens")]
        min_chunk_tokens: usize,
        #[serde(default = "default_breakpoint_percentile")]
        breakpoint_percentile: f64,
    },
}

fn default_min_chunk_tokens() -> usize {
    128
}

fn default_breakpoint_percentile() -> f64 {
    95.0
}

impl ChunkingConfig {
    pub fn recursive(target_tokens: usize, overlap_tokens: usize) -> Self {
        Self::Recursive {
            target_tokens,
            overlap_tokens,
        }
    }

    pub fn semantic() -> Self {
        Self::Semantic {
            min_chunk_tokens: default_min_chunk_tokens(),
            breakpoint_percentile: default_breakpoint_percentile(),
        }
    }

    pub fn strategy_name(&self) -> &'static str {
        match self {
            Self::Recursive { .. } => "recursive",
            Self::Semantic { .. } => "semantic",
        }
    }

    pub fn validate(&self) -> Result<(), ChunkingError> {
        match *self {
            Self::Recursive {
                target_tokens,
                overlap_tokens,
            } => {
                if target_tokens == 0 {
                    return Err(ChunkingError::InvalidConfig("target_tokens must be positive".into()));
                }
                if overlap_tokens >= target_tokens {
                    return Err(ChunkingError::InvalidConfig(format!(
                        "overlap_tokens ({overlap_tokens}) must be below target_tokens ({target_tokens})"
                    )));
                }
            }
            Self::Semantic {
                min_chunk_tokens,
                breakpoint_percentile,
            } => {
                if min_chunk_tokens == 0 {
                    return Err(ChunkingError::InvalidConfig(
                        "min_chunk_tokens must be positive".into(),
                    ));
                }
                if !(breakpoint_percentile > 0.0 && breakpoint_percentile <= 100.0) {
                    return Err(ChunkingError::InvalidConfig(format!(
                        "breakpoint_percentile must lie in (0, 100], got {breakpoint_percentile}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Builds the chunk list of `doc` from byte ranges that are sorted by start.
pub(crate) fn chunks_from_byte_ranges(
    doc: &Document,
    ranges: &[std::ops::Range<usize>],
) -> Vec<Chunk> {
    let text = &doc.text;
    let char_at = |b: usize| text[..b].chars().count();
    ranges
        .iter()
        .enumerate()
        .map(|(ordinal, r)| {
            let piece = &text[r.clone()];
            Chunk {
                chunk_id: format!("{}#{}", doc.id, ordinal),
                doc_id: doc.id.clone(),
                ordinal,
                char_start: char_at(r.start),
                char_end: char_at(r.end),
                token_count: count_tokens(piece),
                text: piece.to_string(),
            }
        })
        .collect()
}

/// Chunks one document with whichever strategy `config` names.
pub fn chunk_document(
    doc: &Document,
    config: &ChunkingConfig,
    embedder: Option<&dyn EmbeddingProvider>,
) -> Result<Vec<Chunk>, ChunkingError> {
    match config {
        ChunkingConfig::Recursive { .. } => chunk_recursive(doc, config),
        ChunkingConfig::Semantic { .. } => {
            chunk_semantic(doc, config, embedder.ok_or(ChunkingError::MissingEmbedder)?)
        }
    }
}

/// Chunks every document of the corpus; output follows corpus order.
pub fn chunk_corpus(
    corpus: &Corpus,
    config: &ChunkingConfig,
    embedder: Option<&dyn EmbeddingProvider>,
    exec: Execution,
) -> Result<Vec<Chunk>, ChunkingError> {
    config.validate()?;
    if matches!(config, ChunkingConfig::Semantic { .. }) && embedder.is_none() {
        return Err(ChunkingError::MissingEmbedder);
    }
    let per_doc = exec.try_map(corpus.documents(), |doc| {
        chunk_document(doc, config, embedder)
    })?;
    Ok(per_doc.into_iter().flatten().collect())
}

/// Writes chunks in the JSONL dump format.
pub fn write_chunks_jsonl<W: Write>(chunks: &[Chunk], mut out: W) -> std::io::Result<()> {
    for chunk in chunks {
        serde_json::to_writer(&mut out, chunk)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
