//! Property suite over generated documents for both chunkers.

use labrag::chunking::{chunk_corpus, chunk_document, count_tokens, token_spans, Chunk, ChunkingConfig};
use labrag::corpus::{Corpus, Document};
use labrag::embedding::HashEmbedder;
use labrag::exec::Execution;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const VOCAB: &[&str] = &[
    "fixar", "formol", "tamponado", "peça", "lâmina", "corte", "micrótomo", "parafina", "xilol", "álcool",
    "hematoxilina", "eosina", "H&E", "10%", "pH", "7,4", "24h", "°C", "banho-maria", "cassete", "bloco",
    "estufa", "coloração", "tecido", "amostra", "registo", "técnico", "protocolo",
];

fn sentence(rng: &mut ChaCha8Rng, words: usize) -> String {
    let mut s: Vec<String> = (0..words).map(|_| VOCAB.choose(rng).unwrap().to_string()).collect();
    let mut first = s[0].chars();
    s[0] = first.next().unwrap().to_uppercase().chain(first).collect();
    let end = ["." , "?", "!", "."].choose(rng).unwrap();
    format!("{}{end}", s.join(" "))
}

/// Paragraphs of short sentences, sometimes with a long unpunctuated run.
fn document(rng: &mut ChaCha8Rng, id: usize, runs: bool) -> Document {
    let mut paragraphs = Vec::new();
    for _ in 0..rng.random_range(1..12) {
        let mut lines = Vec::new();
        for _ in 0..rng.random_range(1..8) {
            let n = rng.random_range(3..20);
            lines.push(sentence(rng, n));
        }
        if runs && rng.random_bool(0.2) {
            let n = rng.random_range(60..400);
            lines.push((0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" "));
        }
        let sep = if rng.random_bool(0.3) { "\n" } else { " " };
        paragraphs.push(lines.join(sep));
    }
    Document::new(format!("d{id:03}"), paragraphs.join("\n\n"))
}

fn corpus(seed: u64, n: usize, runs: bool) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| document(&mut rng, i, runs)).collect()
}

fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end - start).collect()
}

/// Tokens shared by two consecutive chunks.
fn shared_tokens(doc: &Document, prev: &Chunk, next: &Chunk) -> usize {
    let byte_of = |c: usize| doc.text.char_indices().nth(c).map_or(doc.text.len(), |(b, _)| b);
    let (from, to) = (byte_of(next.char_start), byte_of(prev.char_end));
    token_spans(&doc.text).iter().filter(|s| s.start >= from && s.end <= to).count()
}

fn check_tiling(doc: &Document, chunks: &[Chunk]) {
    let len = doc.text.chars().count();
    assert_eq!(chunks[0].char_start, 0, "{}", doc.id);
    assert_eq!(chunks.last().unwrap().char_end, len, "{}", doc.id);
    for (i, c) in chunks.iter().enumerate() {
        assert_eq!(c.ordinal, i);
        assert_eq!(c.chunk_id, format!("{}#{i}", doc.id));
        assert_eq!(c.text, char_slice(&doc.text, c.char_start, c.char_end));
        assert_eq!(c.token_count, count_tokens(&c.text));
        assert!(c.token_count > 0, "{} chunk {i} is empty", doc.id);
    }
    for w in chunks.windows(2) {
        assert!(w[1].char_start <= w[0].char_end, "gap in {}", doc.id);
        assert!(w[1].char_start > w[0].char_start, "no progress in {}", doc.id);
    }
    let tokens: usize = count_tokens(&doc.text);
    assert!(chunks.iter().map(|c| c.token_count).sum::<usize>() >= tokens);
}

#[test]
fn recursive_properties() {
    let docs = corpus(7, 200, true);
    let mut boundaries = 0;
    for (i, doc) in docs.iter().enumerate() {
        let (target, overlap) = [(32, 8), (64, 16), (256, 64), (512, 128)][i % 4];
        let config = ChunkingConfig::recursive(target, overlap);
        let chunks = chunk_document(doc, &config, None).unwrap();
        check_tiling(doc, &chunks);
        assert_eq!(chunks, chunk_document(doc, &config, None).unwrap());
        for c in &chunks {
            assert!(c.token_count <= target, "{} has {} > {target} tokens", c.chunk_id, c.token_count);
        }
        for w in chunks.windows(2) {
            let shared = shared_tokens(doc, &w[0], &w[1]);
            assert!(shared <= overlap, "{}: overlap {shared} > {overlap}", w[1].chunk_id);
            // Overlap is only trimmed when the next chunk would otherwise exceed the target.
            if w[1].token_count < target {
                assert_eq!(shared, overlap.min(w[0].token_count), "{}", w[1].chunk_id);
            }
            boundaries += 1;
        }
    }
    assert!(boundaries > 100);
}

#[test]
fn clean_boundaries_have_exact_overlap() {
    // Short sentences only: every boundary falls between small pieces.
    for (target, overlap) in [(256, 64), (512, 128)] {
        let mut rng = ChaCha8Rng::seed_from_u64(target as u64);
        let text = (0..400).map(|_| {
            let n = rng.random_range(3..15);
            sentence(&mut rng, n)
        }).collect::<Vec<_>>().join(" ");
        let doc = Document::new("long", text);
        let chunks = chunk_document(&doc, &ChunkingConfig::recursive(target, overlap), None).unwrap();
        assert!(chunks.len() >= 3);
        for w in chunks.windows(2) {
            assert_eq!(shared_tokens(&doc, &w[0], &w[1]), overlap);
        }
    }
}

#[test]
fn semantic_properties() {
    let embedder = HashEmbedder::new(64, 3);
    let docs = corpus(11, 200, false);
    for (i, doc) in docs.iter().enumerate() {
        let config = ChunkingConfig::Semantic {
            min_chunk_tokens: [8, 32, 128][i % 3],
            breakpoint_percentile: [50.0, 80.0, 95.0][i % 3],
        };
        let chunks = chunk_document(doc, &config, Some(&embedder)).unwrap();
        check_tiling(doc, &chunks);
        // Semantic chunks partition the text.
        for w in chunks.windows(2) {
            assert_eq!(w[1].char_start, w[0].char_end);
        }
        assert_eq!(chunks, chunk_document(doc, &config, Some(&embedder)).unwrap());
    }
}

#[test]
fn semantic_degenerate_cases() {
    let embedder = HashEmbedder::default();
    let config = ChunkingConfig::Semantic { min_chunk_tokens: 4, breakpoint_percentile: 50.0 };
    let one = Document::new("one", "Fixar a peça em formol tamponado durante vinte e quatro horas.");
    assert_eq!(chunk_document(&one, &config, Some(&embedder)).unwrap().len(), 1);
    let same = Document::new("same", ["Corar com eosina durante dois minutos."; 12].join(" "));
    assert_eq!(chunk_document(&same, &config, Some(&embedder)).unwrap().len(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let doc = document(&mut rng, 0, false);
    let huge_min = ChunkingConfig::Semantic {
        min_chunk_tokens: count_tokens(&doc.text) + 1,
        breakpoint_percentile: 50.0,
    };
    assert_eq!(chunk_document(&doc, &huge_min, Some(&embedder)).unwrap().len(), 1);
}

#[test]
fn execution_modes_agree() {
    let corpus = Corpus::from_documents(corpus(3, 60, true)).unwrap();
    let embedder = HashEmbedder::new(32, 0);
    for config in [ChunkingConfig::recursive(64, 16), ChunkingConfig::semantic()] {
        let a = chunk_corpus(&corpus, &config, Some(&embedder), Execution::Sequential).unwrap();
        let b = chunk_corpus(&corpus, &config, Some(&embedder), Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
