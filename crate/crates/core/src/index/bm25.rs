//! Okapi BM25 over chunks.
//!
//! `rsv(q, d) = Σ_{t ∈ q} ln(N / df_t) · (k1 + 1)·tf / (k1·(1 − b + b·L_d/L_avg) + tf)`
//!
//! The idf is the plain `ln(N / df_t)`, without the +0.5 smoothing some
//! variants use, so a term present in every chunk contributes exactly zero.
//! Query tokens are summed with multiplicity.

use std::collections::{BTreeMap, HashMap};

use super::{top_k_hits, IndexError, ScoredHit};
use crate::chunking::{tokenize, Chunk};

pub const DEFAULT_K1: f64 = 1.5;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index {
    chunk_ids: Vec<String>,
    id_to_index: HashMap<String, usize>,
    doc_freq: BTreeMap<String, u32>,
    doc_lengths: Vec<u32>,
    avg_len: f64,
    /// token -> (chunk index, term frequency), sorted by chunk index.
    postings: BTreeMap<String, Vec<(u32, u32)>>,
    k1: f64,
    b: f64,
}

impl Bm25Index {
    pub fn build(chunks: &[Chunk]) -> Result<Self, IndexError> {
        Self::build_with_params(chunks, DEFAULT_K1, DEFAULT_B)
    }

    pub fn build_with_params(chunks: &[Chunk], k1: f64, b: f64) -> Result<Self, IndexError> {
        if chunks.is_empty() {
            return Err(IndexError::EmptyChunks);
        }
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(chunks.len());
        for (i, chunk) in chunks.iter().enumerate() {
            let tokens = tokenize(&chunk.text);
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (t, n) in tf {
                postings.entry(t).or_default().push((i as u32, n));
            }
        }
        let doc_freq = postings
            .iter()
            .map(|(t, list)| (t.clone(), list.len() as u32))
            .collect();
        let avg_len = mean(&doc_lengths);
        let chunk_ids: Vec<String> = chunks.iter().map(|c| c.chunk_id.clone()).collect();
        Ok(Self {
            id_to_index: index_ids(&chunk_ids),
            chunk_ids,
            doc_freq,
            doc_lengths,
            avg_len,
            postings,
            k1,
            b,
        })
    }

    /// Reassembles an index from persisted statistics, checking every invariant.
    pub(crate) fn from_parts(
        chunk_ids: Vec<String>,
        doc_freq: BTreeMap<String, u32>,
        doc_lengths: Vec<u32>,
        avg_len: f64,
        postings: BTreeMap<String, Vec<(u32, u32)>>,
        k1: f64,
        b: f64,
    ) -> Result<Self, IndexError> {
        let corrupt = |m: String| Err(IndexError::CorruptIndex(m));
        let n = chunk_ids.len();
        if n == 0 || doc_lengths.len() != n {
            return corrupt(format!("{} doc lengths for {n} chunks", doc_lengths.len()));
        }
        if doc_freq.len() != postings.len() {
            return corrupt("doc_freq and postings cover different tokens".into());
        }
        let mut recount = vec![0u32; n];
        for (token, list) in &postings {
            let Some(&df) = doc_freq.get(token) else {
                return corrupt(format!("token `{token}` has postings but no doc_freq"));
            };
            if df == 0 || df as usize > n || df as usize != list.len() {
                return corrupt(format!("doc_freq of `{token}` is {df} with {} postings", list.len()));
            }
            let mut prev: Option<u32> = None;
            for &(i, tf) in list {
                if i as usize >= n || tf == 0 || prev.is_some_and(|p| p >= i) {
                    return corrupt(format!("bad posting ({i}, {tf}) for `{token}`"));
                }
                prev = Some(i);
                recount[i as usize] += tf;
            }
        }
        if recount != doc_lengths {
            return corrupt("doc lengths disagree with postings".into());
        }
        if avg_len.to_bits() != mean(&doc_lengths).to_bits() {
            return corrupt(format!("avg_len {avg_len} is not the mean doc length"));
        }
        Ok(Self {
            id_to_index: index_ids(&chunk_ids),
            chunk_ids,
            doc_freq,
            doc_lengths,
            avg_len,
            postings,
            k1,
            b,
        })
    }

    pub fn num_chunks(&self) -> usize {
        self.chunk_ids.len()
    }

    pub fn chunk_ids(&self) -> &[String] {
        &self.chunk_ids
    }

    pub fn doc_freq(&self) -> &BTreeMap<String, u32> {
        &self.doc_freq
    }

    pub fn doc_length(&self, chunk_index: usize) -> u32 {
        self.doc_lengths[chunk_index]
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn postings(&self) -> &BTreeMap<String, Vec<(u32, u32)>> {
        &self.postings
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    fn term_score(&self, df: u32, tf: u32, chunk_index: usize) -> f64 {
        let n = self.num_chunks() as f64;
        let idf = (n / f64::from(df)).ln();
        let tf = f64::from(tf);
        let len_ratio = f64::from(self.doc_lengths[chunk_index]) / self.avg_len;
        idf * ((self.k1 + 1.0) * tf) / (self.k1 * (1.0 - self.b + self.b * len_ratio) + tf)
    }

    fn tf(&self, token: &str, chunk_index: usize) -> Option<(u32, u32)> {
        let list = self.postings.get(token)?;
        let pos = list
            .binary_search_by_key(&(chunk_index as u32), |&(i, _)| i)
            .ok()?;
        Some((list.len() as u32, list[pos].1))
    }

    pub fn score(&self, query: &str, chunk_id: &str) -> Result<f64, IndexError> {
        let &index = self
            .id_to_index
            .get(chunk_id)
            .ok_or_else(|| IndexError::UnknownChunk(chunk_id.to_string()))?;
        Ok(self.score_index(&tokenize(query), index))
    }

    pub(crate) fn score_index(&self, query_tokens: &[String], chunk_index: usize) -> f64 {
        query_tokens
            .iter()
            .filter_map(|t| self.tf(t, chunk_index))
            .map(|(df, tf)| self.term_score(df, tf, chunk_index))
            .sum()
    }

    /// Best `k` chunks with a positive score, ties by chunk id. Chunks with no
    /// query token never appear.
    pub fn topk(&self, query: &str, k: usize) -> Result<Vec<ScoredHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        let tokens = tokenize(query);
        let mut scores = vec![0.0f64; self.num_chunks()];
        let mut touched = vec![false; self.num_chunks()];
        for t in &tokens {
            let Some(list) = self.postings.get(t) else {
                continue;
            };
            let df = list.len() as u32;
            for &(i, tf) in list {
                scores[i as usize] += self.term_score(df, tf, i as usize);
                touched[i as usize] = true;
            }
        }
        let candidates = scores
            .into_iter()
            .enumerate()
            .filter(|&(i, s)| touched[i] && s > 0.0)
            .collect();
        Ok(top_k_hits(candidates, k, |i| self.chunk_ids[i].clone()))
    }
}

fn mean(lengths: &[u32]) -> f64 {
    lengths.iter().map(|&l| f64::from(l)).sum::<f64>() / lengths.len() as f64
}

fn index_ids(ids: &[String]) -> HashMap<String, usize> {
    ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect()
}
