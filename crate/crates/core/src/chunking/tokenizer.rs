//! The shared word tokenizer.
//!
//! Rules: text splits on Unicode whitespace; every maximal run of
//! letters-or-digits is one token; every other non-whitespace character is a
//! token on its own. Tokens are lowercased after segmentation, so the token
//! count never depends on case mapping.

use std::ops::Range;

/// Byte ranges of every token in `text`, in order.
pub fn token_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if word_start.is_none() {
                word_start = Some(i);
            }
            continue;
        }
        if let Some(start) = word_start.take() {
            spans.push(start..i);
        }
        if !c.is_whitespace() {
            spans.push(i..i + c.len_utf8());
        }
    }
    if let Some(start) = word_start {
        spans.push(start..text.len());
    }
    spans
}

/// Lowercased tokens of `text`.
pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text)
        .into_iter()
        .map(|r| text[r].to_lowercase())
        .collect()
}

pub fn count_tokens(text: &str) -> usize {
    token_spans(text).len()
}

/// True for tokens made of letters or digits, as opposed to punctuation and symbols.
pub fn is_content_token(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_alphanumeric)
}
