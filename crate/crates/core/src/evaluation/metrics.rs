//! Answer-quality metrics (through a judge) and deterministic top-k metrics.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::judge::{Judge, JudgeError};
use crate::chunking::{tokenize, Chunk};
use crate::corpus::Document;
use crate::embedding::{cosine_similarity, embed_texts, EmbeddingError, EmbeddingProvider, VectorError};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("{0}")]
    InvalidInput(&'static str),
}

/// Supported statements over total statements.
pub fn faithfulness(answer: &str, contexts: &[&str], judge: &dyn Judge) -> Result<f64, MetricError> {
    if answer.trim().is_empty() {
        return Err(MetricError::InvalidInput("faithfulness needs a non-empty answer"));
    }
    let statements = judge.decompose(answer)?;
    if statements.is_empty() {
        return Err(JudgeError::Failure("no statements".into()).into());
    }
    let context = contexts.join("\n\n");
    let mut supported = 0usize;
    for s in &statements {
        if judge.supported(s, &context)? {
            supported += 1;
        }
    }
    Ok(supported as f64 / statements.len() as f64)
}

/// Mean cosine between the question and `n` questions regenerated from the answer.
pub fn answer_relevance(
    question: &str,
    answer: &str,
    judge: &dyn Judge,
    provider: &dyn EmbeddingProvider,
    n: usize,
) -> Result<f64, MetricError> {
    if n == 0 {
        return Err(MetricError::InvalidInput("answer relevance needs n >= 1"));
    }
    let generated = judge.generate_questions(answer, n)?;
    if generated.len() != n {
        return Err(JudgeError::Failure(format!("asked for {n} questions, got {}", generated.len())).into());
    }
    let mut texts: Vec<&str> = vec![question];
    texts.extend(generated.iter().map(String::as_str));
    let vectors = embed_texts(provider, &texts)?;
    let mut total = 0.0;
    for v in &vectors[1..] {
        total += cosine_similarity(&vectors[0], v)?;
    }
    Ok(total / n as f64)
}

/// Relevant retrieved chunks over total retrieved chunks.
pub fn context_recall(retrieved: &[&str], reference: &str, judge: &dyn Judge) -> Result<f64, MetricError> {
    if retrieved.is_empty() {
        return Err(MetricError::InvalidInput("context recall needs at least one retrieved chunk"));
    }
    let mut relevant = 0usize;
    for chunk in retrieved {
        if judge.relevant(chunk, reference)? {
            relevant += 1;
        }
    }
    Ok(relevant as f64 / retrieved.len() as f64)
}

/// Harmonic mean, zero when both inputs are zero.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopKScores {
    pub precision_at: BTreeMap<usize, f64>,
    pub recall_at: BTreeMap<usize, f64>,
    pub f1_at: BTreeMap<usize, f64>,
}

impl TopKScores {
    fn insert(&mut self, k: usize, precision: f64, recall: f64) {
        self.precision_at.insert(k, precision);
        self.recall_at.insert(k, recall);
        self.f1_at.insert(k, f1(precision, recall));
    }
}

/// How top-k relevance is decided.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopKMode {
    /// Token-set overlap between the top-k chunks and the reference.
    #[default]
    Token,
    /// Character-span overlap with the reference's location in its source document.
    Span,
}

/// Token-overlap precision, recall and F1 at each cutoff.
///
/// With `R` the token set of the first `min(k, n)` chunks and `G` the token
/// set of the reference: precision = |R∩G|/|R|, recall = |R∩G|/|G|.
pub fn topk_metrics(retrieved_ranked: &[&str], reference: &str, ks: &[usize]) -> TopKScores {
    let gold: HashSet<String> = tokenize(reference).into_iter().collect();
    let mut scores = TopKScores::default();
    for &k in ks {
        let mut seen: HashSet<String> = HashSet::new();
        for chunk in retrieved_ranked.iter().take(k) {
            seen.extend(tokenize(chunk));
        }
        let hit = seen.intersection(&gold).count() as f64;
        let precision = if seen.is_empty() { 0.0 } else { hit / seen.len() as f64 };
        let recall = if gold.is_empty() { 0.0 } else { hit / gold.len() as f64 };
        scores.insert(k, precision, recall);
    }
    scores
}

/// Character span of `reference` inside `doc`, if it occurs verbatim.
pub fn locate_reference(doc: &Document, reference: &str) -> Option<(usize, usize)> {
    let needle = reference.trim();
    if needle.is_empty() {
        return None;
    }
    let byte = doc.text.find(needle)?;
    let start = doc.text[..byte].chars().count();
    Some((start, start + needle.chars().count()))
}

/// Span-overlap variant: a chunk is relevant when it comes from the source
/// document and overlaps the reference span. Precision is the share of
/// relevant chunks among the first `min(k, n)`; recall is the share of the
/// reference span's characters they cover. `None` when the reference does not
/// occur verbatim in its source document.
pub fn topk_span_metrics(
    retrieved_ranked: &[&Chunk],
    reference: &str,
    source: &Document,
    ks: &[usize],
) -> Option<TopKScores> {
    let (ref_start, ref_end) = locate_reference(source, reference)?;
    let mut scores = TopKScores::default();
    for &k in ks {
        let top: Vec<&Chunk> = retrieved_ranked.iter().take(k).copied().collect();
        let mut relevant = 0usize;
        let mut covered: Vec<(usize, usize)> = Vec::new();
        for c in &top {
            if c.doc_id != source.id {
                continue;
            }
            let (s, e) = (c.char_start.max(ref_start), c.char_end.min(ref_end));
            if s < e {
                relevant += 1;
                covered.push((s, e));
            }
        }
        covered.sort_unstable();
        let mut covered_len = 0usize;
        let mut cursor = ref_start;
        for (s, e) in covered {
            let s = s.max(cursor);
            if e > s {
                covered_len += e - s;
                cursor = e;
            }
        }
        let precision = if top.is_empty() { 0.0 } else { relevant as f64 / top.len() as f64 };
        let recall = covered_len as f64 / (ref_end - ref_start) as f64;
        scores.insert(k, precision, recall);
    }
    Some(scores)
}
