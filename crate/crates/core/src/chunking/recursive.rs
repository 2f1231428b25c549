//! Length-bounded splitting along a separator hierarchy, with token overlap.
//!
//! Work happens over token indices. Every gap between two adjacent tokens is
//! a split point ranked by the separator it contains: paragraph break, line
//! break, sentence boundary, plain whitespace, or nothing at all (a split
//! between two characters). An over-long span is cut at all of its
//! highest-ranked split points and each piece is handled the same way until
//! every piece fits. Pieces are then packed greedily; each new chunk first
//! re-emits up to `overlap_tokens` trailing tokens of the previous one, fewer
//! only when the next piece would otherwise push the chunk past the target.
//!
//! A chunk covering tokens `[a, b)` spans bytes from the start of token `a`
//! to the start of token `b`, so separators trail the chunk they follow. The
//! first chunk starts at byte 0 and the last one ends at the end of the text.

use std::collections::HashSet;
use std::ops::Range;

use super::{
    chunks_from_byte_ranges, sentence_byte_spans, token_spans, Chunk, ChunkingConfig,
    ChunkingError,
};
use crate::corpus::Document;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Separator {
    Paragraph,
    Line,
    Sentence,
    Whitespace,
    Character,
}

/// Separator rank of the gap in front of each token (index 0 unused).
fn gap_levels(text: &str, spans: &[Range<usize>]) -> Vec<Separator> {
    let sentence_starts: HashSet<usize> = sentence_byte_spans(text)
        .into_iter()
        .map(|r| r.start)
        .collect();
    let mut levels = vec![Separator::Character; spans.len()];
    for i in 1..spans.len() {
        let gap = &text[spans[i - 1].end..spans[i].start];
        let newlines = gap.matches('\n').count();
        levels[i] = if newlines >= 2 {
            Separator::Paragraph
        } else if newlines == 1 {
            Separator::Line
        } else if sentence_starts.contains(&spans[i].start) {
            Separator::Sentence
        } else if !gap.is_empty() {
            Separator::Whitespace
        } else {
            Separator::Character
        };
    }
    levels
}

fn split_into_pieces(
    range: Range<usize>,
    levels: &[Separator],
    target: usize,
    out: &mut Vec<Range<usize>>,
) {
    if range.len() <= target || range.len() < 2 {
        out.push(range);
        return;
    }
    let best = (range.start + 1..range.end)
        .map(|i| levels[i])
        .min()
        .expect("range has an interior split point");
    let mut start = range.start;
    for i in range.start + 1..range.end {
        if levels[i] == best {
            split_into_pieces(start..i, levels, target, out);
            start = i;
        }
    }
    split_into_pieces(start..range.end, levels, target, out);
}

/// Greedy packing of pieces into token ranges of at most `target` tokens.
fn pack(pieces: &[Range<usize>], target: usize, overlap: usize) -> Vec<Range<usize>> {
    let mut chunks = Vec::new();
    let Some(first) = pieces.first() else {
        return chunks;
    };
    let mut current = first.clone();
    for piece in &pieces[1..] {
        if piece.end - current.start <= target {
            current.end = piece.end;
            continue;
        }
        chunks.push(current.clone());
        let wanted = current.end.saturating_sub(overlap).max(current.start);
        let start = wanted.max(piece.end.saturating_sub(target)).min(piece.start);
        current = start..piece.end;
    }
    chunks.push(current);
    chunks
}

/// Token ranges of the recursive chunks of `text`.
pub(crate) fn recursive_token_ranges(
    text: &str,
    spans: &[Range<usize>],
    target: usize,
    overlap: usize,
) -> Vec<Range<usize>> {
    if spans.is_empty() {
        return Vec::new();
    }
    let levels = gap_levels(text, spans);
    let mut pieces = Vec::new();
    split_into_pieces(0..spans.len(), &levels, target, &mut pieces);
    pack(&pieces, target, overlap)
}

pub fn chunk_recursive(doc: &Document, config: &ChunkingConfig) -> Result<Vec<Chunk>, ChunkingError> {
    config.validate()?;
    let ChunkingConfig::Recursive {
        target_tokens,
        overlap_tokens,
    } = *config
    else {
        return Err(ChunkingError::InvalidConfig(
            "chunk_recursive needs a recursive config".into(),
        ));
    };
    let text = &doc.text;
    let spans = token_spans(text);
    let token_ranges = recursive_token_ranges(text, &spans, target_tokens, overlap_tokens);
    let n = spans.len();
    let byte_ranges: Vec<Range<usize>> = token_ranges
        .iter()
        .map(|r| {
            let start = if r.start == 0 { 0 } else { spans[r.start].start };
            let end = if r.end == n { text.len() } else { spans[r.end].start };
            start..end
        })
        .collect();
    Ok(chunks_from_byte_ranges(doc, &byte_ranges))
}
