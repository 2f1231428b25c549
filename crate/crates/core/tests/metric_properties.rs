//! Properties of the top-k metrics, the F1 identity and the trend over k.

use labrag::chunking::ChunkingConfig;
use labrag::corpus::{Corpus, Document, QaPair};
use labrag::evaluation::{f1, run_experiment, topk_metrics, ExperimentConfig};
use labrag::exec::Execution;
use labrag::retrieval::{RetrievalConfig, Strategy};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const KS: [usize; 4] = [1, 2, 4, 8];

#[test]
fn f1_is_the_harmonic_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let (p, r): (f64, f64) = (rng.random(), rng.random());
        let f = f1(p, r);
        assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-12);
        assert!((1.0 / f - 0.5 * (1.0 / p + 1.0 / r)).abs() < 1e-12 * (1.0 / f).max(1.0));
        if p != r {
            assert!(f > p.min(r) && f < p.max(r));
        }
    }
    assert_eq!(f1(0.0, 0.0), 0.0);
    assert_eq!(f1(0.0, 0.7), 0.0);
}

fn random_text(rng: &mut ChaCha8Rng, vocab: usize) -> String {
    let len = rng.random_range(1..30);
    (0..len).map(|_| format!("t{}", rng.random_range(0..vocab))).collect::<Vec<_>>().join(" ")
}

#[test]
fn recall_is_monotone_in_k() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let vocab = rng.random_range(5..200);
        let n = rng.random_range(0..12);
        let chunks: Vec<String> = (0..n).map(|_| random_text(&mut rng, vocab)).collect();
        let reference = random_text(&mut rng, vocab);
        let refs: Vec<&str> = chunks.iter().map(String::as_str).collect();
        let ks: Vec<usize> = (1..=12).collect();
        let s = topk_metrics(&refs, &reference, &ks);
        for w in ks.windows(2) {
            assert!(s.recall_at[&w[1]] >= s.recall_at[&w[0]]);
        }
        for k in &ks {
            let (p, r, f) = (s.precision_at[k], s.recall_at[k], s.f1_at[k]);
            assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&r));
            assert_eq!(f, f1(p, r));
            assert_eq!(f == 0.0, p == 0.0 && r == 0.0);
        }
    }
}

/// Token-disjoint chunks of equal size: with the match at rank `m`,
/// precision@k = [m <= k] / k and recall@k = [m <= k].
#[test]
fn single_chunk_reference_closed_form() {
    let chunks: Vec<String> = (0..8).map(|i| (0..10).map(|j| format!("d{i}w{j}")).collect::<Vec<_>>().join(" ")).collect();
    let refs: Vec<&str> = chunks.iter().map(String::as_str).collect();
    for m in 1..=8 {
        let mut ranked = refs.clone();
        ranked.swap(0, m - 1);
        let s = topk_metrics(&ranked, refs[0], &KS);
        for k in KS {
            let hit = if m <= k { 1.0 } else { 0.0 };
            assert_eq!(s.precision_at[&k], hit / k as f64);
            assert_eq!(s.recall_at[&k], hit);
        }
    }
}

/// Synthetic benchmark: forty token-disjoint one-chunk documents. Each question
/// carries two tokens of its own document and a few tokens of others, so the
/// matching chunk lands at varying ranks.
pub fn disjoint_benchmark() -> (Corpus, Vec<QaPair>) {
    let docs: Vec<Document> = (0..40)
        .map(|i| {
            let text = (0..12).map(|j| format!("d{i}w{j}")).collect::<Vec<_>>().join(" ");
            Document::new(format!("doc{i:02}"), format!("{text}."))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let qa = (0..40)
        .map(|i| {
            let mut words = vec![format!("d{i}w0"), format!("d{i}w1")];
            for _ in 0..rng.random_range(0..6) {
                let other = rng.random_range(0..40);
                words.push(format!("d{other}w{}", rng.random_range(0..12)));
            }
            QaPair {
                question: words.join(" "),
                ground_truth: docs[i].text.clone(),
                reference_context: docs[i].text.clone(),
                source_doc_id: docs[i].id.clone(),
                extra: Default::default(),
            }
        })
        .collect();
    (Corpus::from_documents(docs).unwrap(), qa)
}

#[test]
fn precision_falls_and_recall_rises_with_k() {
    let (corpus, qa) = disjoint_benchmark();
    let config = ExperimentConfig::deterministic(
        "trend",
        ChunkingConfig::recursive(64, 0),
        RetrievalConfig { k: 8, ..RetrievalConfig::with_strategy(Strategy::Naive) },
    );
    let report = run_experiment(&corpus, &qa, &config, Execution::Parallel).unwrap();
    assert_eq!(report.num_chunks, 40);
    let a = &report.aggregates;
    let p: Vec<f64> = KS.iter().map(|k| a.precision_at[k]).collect();
    let r: Vec<f64> = KS.iter().map(|k| a.recall_at[k]).collect();
    for i in 1..KS.len() {
        assert!(p[i] < p[i - 1], "precision {p:?}");
        assert!(r[i] > r[i - 1], "recall {r:?}");
    }
}
