//! Splitting at semantic discontinuities.
//!
//! Each sentence is embedded together with one neighbour on either side.
//! Adjacent windows are compared by cosine distance, and a boundary is placed
//! after every sentence whose distance to the next window strictly exceeds
//! the configured percentile of all distances. Segments shorter than
//! `min_chunk_tokens` are folded into their successor, or into their
//! predecessor when they come last. There is no upper size bound.

use std::ops::Range;

use super::{chunks_from_byte_ranges, count_tokens, sentence_byte_spans, Chunk, ChunkingConfig, ChunkingError};
use crate::corpus::Document;
use crate::embedding::{cosine, embed_texts, EmbeddingProvider, EmbeddingVector, VectorError};

/// Percentile of `values` with linear interpolation between order statistics
/// (`p` in `[0, 100]`). Returns `None` for an empty slice.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

fn window_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    match cosine(a.values(), b.values()) {
        Ok(c) => 1.0 - c,
        // Two empty windows are alike; one empty window against text is not.
        Err(VectorError::ZeroVector) if a.is_zero() && b.is_zero() => 0.0,
        Err(_) => 1.0,
    }
}

/// Cosine distances between consecutive buffered sentence windows.
pub(crate) fn window_distances(
    text: &str,
    sentences: &[Range<usize>],
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<f64>, crate::embedding::EmbeddingError> {
    let n = sentences.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    let windows: Vec<&str> = (0..n)
        .map(|i| {
            let first = i.saturating_sub(1);
            let last = (i + 1).min(n - 1);
            &text[sentences[first].start..sentences[last].end]
        })
        .collect();
    let vectors = embed_texts(embedder, &windows)?;
    Ok(vectors
        .windows(2)
        .map(|pair| window_distance(&pair[0], &pair[1]))
        .collect())
}

pub fn chunk_semantic(
    doc: &Document,
    config: &ChunkingConfig,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<Chunk>, ChunkingError> {
    config.validate()?;
    let ChunkingConfig::Semantic {
        min_chunk_tokens,
        breakpoint_percentile,
    } = *config
    else {
        return Err(ChunkingError::InvalidConfig(
            "chunk_semantic needs a semantic config".into(),
        ));
    };
    let text = &doc.text;
    if count_tokens(text) == 0 {
        return Ok(Vec::new());
    }
    let sentences = sentence_byte_spans(text);
    let distances = window_distances(text, &sentences, embedder).map_err(|source| {
        ChunkingError::Embedding {
            doc_id: doc.id.clone(),
            source,
        }
    })?;

    let mut segments: Vec<Range<usize>> = Vec::new();
    let mut start = 0usize;
    if let Some(threshold) = percentile(&distances, breakpoint_percentile) {
        for (i, &d) in distances.iter().enumerate() {
            if d > threshold {
                let end = sentences[i].end;
                segments.push(start..end);
                start = end;
            }
        }
    }
    segments.push(start..text.len());

    let mut i = 0;
    while segments.len() > 1 && i < segments.len() {
        if count_tokens(&text[segments[i].clone()]) >= min_chunk_tokens {
            i += 1;
        } else if i + 1 < segments.len() {
            segments[i + 1].start = segments[i].start;
            segments.remove(i);
        } else {
            segments[i - 1].end = segments[i].end;
            segments.remove(i);
        }
    }
    Ok(chunks_from_byte_ranges(doc, &segments))
}
