use std::ops::Range;

use serde::{Deserialize, Serialize};

/// A sentence span. Offsets count Unicode scalar values, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Byte ranges of the sentences of `text`. The ranges tile the input exactly;
/// whitespace after a boundary belongs to the sentence before it.
pub(crate) fn sentence_byte_spans(text: &str) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i].1;
        if !(is_terminator(c) || c == '\n') {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        if c != '\n' {
            while j < chars.len() && is_terminator(chars[j].1) {
                j += 1;
            }
        }
        let boundary = match chars.get(j) {
            None => true,
            Some(&(_, next)) => next.is_whitespace() || next.is_uppercase(),
        };
        if boundary {
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            let end = byte_at(j);
            if end > start {
                spans.push(start..end);
            }
            start = end;
        }
        i = j;
    }
    if start < text.len() {
        spans.push(start..text.len());
    }
    spans
}

/// Splits `text` into sentences at `.`, `!`, `?` or a newline that is
/// followed by whitespace, an uppercase letter, or the end of the text.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let spans = sentence_byte_spans(text);
    let mut out = Vec::with_capacity(spans.len());
    let mut chars_before = 0usize;
    for span in spans {
        let piece = &text[span];
        let len = piece.chars().count();
        out.push(Sentence {
            text: piece.to_string(),
            char_start: chars_before,
            char_end: chars_before + len,
        });
        chars_before += len;
    }
    out
}
