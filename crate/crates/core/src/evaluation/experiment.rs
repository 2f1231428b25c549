//! End-to-end experiment runs: index, retrieve, generate, score, report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::judge::Judge;
use super::metrics::{
    answer_relevance, context_recall, faithfulness, topk_metrics, topk_span_metrics, TopKMode, TopKScores,
};
use crate::chunking::ChunkingConfig;
use crate::config::{GeneratorSpec, JudgeSpec, ProviderSpec};
use crate::corpus::{Corpus, QaPair};
use crate::embedding::EmbeddingProvider;
use crate::exec::Execution;
use crate::generation::{assemble_prompt, generate_answer, ContextPassage, Generator, PromptLanguage, NO_CONTEXT};
use crate::index::{IndexBundle, IndexError};
use crate::retrieval::{retrieve, RetrievalConfig, RetrievedChunk};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("the QA benchmark is empty")]
    EmptyBenchmark,
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn default_ks() -> Vec<usize> {
    vec![1, 2, 4, 8]
}

fn default_n() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub chunking: ChunkingConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub embedding: ProviderSpec,
    #[serde(default)]
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub judge: JudgeSpec,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    #[serde(default = "default_n")]
    pub answer_relevance_n: usize,
    #[serde(default)]
    pub topk_mode: TopKMode,
    #[serde(default)]
    pub language: PromptLanguage,
}

impl ExperimentConfig {
    /// Hash embedder, extractive generator and containment judge.
    pub fn deterministic(id: impl Into<String>, chunking: ChunkingConfig, retrieval: RetrievalConfig) -> Self {
        Self {
            id: id.into(),
            description: String::new(),
            chunking,
            retrieval,
            embedding: ProviderSpec::default(),
            generator: GeneratorSpec::Stub,
            judge: JudgeSpec::default(),
            ks: default_ks(),
            answer_relevance_n: default_n(),
            topk_mode: TopKMode::Token,
            language: PromptLanguage::En,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(format!("{}: {m}", self.id)));
        if self.id.trim().is_empty() {
            return Err(ExperimentError::InvalidConfig("experiment id is empty".into()));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return bad("ks must be non-empty and each k at least 1".into());
        }
        if self.answer_relevance_n == 0 {
            return bad("answer_relevance_n must be at least 1".into());
        }
        if let Err(e) = self.chunking.validate() {
            return bad(e.to_string());
        }
        if let Err(e) = self.retrieval.validate() {
            return bad(e.to_string());
        }
        Ok(())
    }

    /// Retrieval depth needed to score every cutoff as well as build the context.
    fn eval_depth(&self) -> usize {
        self.ks.iter().copied().max().unwrap_or(1).max(self.retrieval.k)
    }
}

/// Per-question result. Absent metrics come with an explanation in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub question_id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub faithfulness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer_relevance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context_recall: Option<f64>,
    pub precision_at: BTreeMap<usize, f64>,
    pub recall_at: BTreeMap<usize, f64>,
    pub f1_at: BTreeMap<usize, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub context_chunk_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MetricRow {
    fn empty(question_id: usize) -> Self {
        Self {
            question_id,
            faithfulness: None,
            answer_relevance: None,
            context_recall: None,
            precision_at: BTreeMap::new(),
            recall_at: BTreeMap::new(),
            f1_at: BTreeMap::new(),
            answer: None,
            context_chunk_ids: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn set_topk(&mut self, scores: TopKScores) {
        self.precision_at = scores.precision_at;
        self.recall_at = scores.recall_at;
        self.f1_at = scores.f1_at;
    }
}

/// Macro averages: each metric is the mean over the rows where it is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub questions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub faithfulness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer_relevance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context_recall: Option<f64>,
    pub precision_at: BTreeMap<usize, f64>,
    pub recall_at: BTreeMap<usize, f64>,
    pub f1_at: BTreeMap<usize, f64>,
    pub rows_with_notes: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn mean_at(rows: &[MetricRow], pick: impl Fn(&MetricRow) -> &BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
    let mut ks: Vec<usize> = rows.iter().flat_map(|r| pick(r).keys().copied()).collect();
    ks.sort_unstable();
    ks.dedup();
    ks.into_iter()
        .filter_map(|k| mean(rows.iter().filter_map(|r| pick(r).get(&k).copied())).map(|m| (k, m)))
        .collect()
}

impl Aggregates {
    pub fn from_rows(rows: &[MetricRow]) -> Self {
        Self {
            questions: rows.len(),
            faithfulness: mean(rows.iter().filter_map(|r| r.faithfulness)),
            answer_relevance: mean(rows.iter().filter_map(|r| r.answer_relevance)),
            context_recall: mean(rows.iter().filter_map(|r| r.context_recall)),
            precision_at: mean_at(rows, |r| &r.precision_at),
            recall_at: mean_at(rows, |r| &r.recall_at),
            f1_at: mean_at(rows, |r| &r.f1_at),
            rows_with_notes: rows.iter().filter(|r| !r.notes.is_empty()).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub experiment_id: String,
    pub config: ExperimentConfig,
    pub provider: String,
    pub num_chunks: usize,
    pub rows: Vec<MetricRow>,
    pub aggregates: Aggregates,
    /// Wall-clock time; left out unless requested so reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `<dir>/<experiment_id>.json` and returns its path.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<PathBuf, ExperimentError> {
        let dir = dir.as_ref();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ExperimentError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join(format!("{}.json", self.experiment_id));
        std::fs::write(&path, self.to_json()).map_err(io(&path))?;
        Ok(path)
    }
}

struct Stack<'a> {
    bundle: &'a IndexBundle,
    provider: &'a dyn EmbeddingProvider,
    generator: &'a dyn Generator,
    judge: &'a dyn Judge,
    config: &'a ExperimentConfig,
}

impl Stack<'_> {
    fn evaluate(&self, question_id: usize, qa: &QaPair) -> MetricRow {
        let cfg = self.config;
        let mut row = MetricRow::empty(question_id);

        // Deeper retrieval with the pool pinned to the configured k, so the
        // first k hits are exactly what a k-deep query would return.
        let retrieval = RetrievalConfig {
            k: cfg.eval_depth(),
            candidate_pool: Some(cfg.retrieval.pool()),
            ..cfg.retrieval.clone()
        };
        let ranked = match retrieve(
            &qa.question,
            &self.bundle.vectors,
            &self.bundle.bm25,
            self.provider,
            &retrieval,
        ) {
            Ok(r) => r.hits,
            Err(e) => {
                row.notes.push(format!("retrieval: {e}"));
                return row;
            }
        };

        match cfg.topk_mode {
            TopKMode::Token => {
                let texts: Vec<&str> = ranked.iter().map(|h| h.chunk.text.as_str()).collect();
                row.set_topk(topk_metrics(&texts, &qa.reference_context, &cfg.ks));
            }
            TopKMode::Span => {
                let chunks: Vec<_> = ranked.iter().map(|h| &h.chunk).collect();
                match self
                    .bundle
                    .document(&qa.source_doc_id)
                    .and_then(|doc| topk_span_metrics(&chunks, &qa.reference_context, doc, &cfg.ks))
                {
                    Some(scores) => row.set_topk(scores),
                    None => row.notes.push("top-k: reference not found verbatim in its source document".into()),
                }
            }
        }

        let context: Vec<&RetrievedChunk> = ranked.iter().take(cfg.retrieval.k).collect();
        row.context_chunk_ids = context.iter().map(|h| h.chunk.chunk_id.clone()).collect();
        let texts: Vec<&str> = context.iter().map(|h| h.chunk.text.as_str()).collect();

        if texts.is_empty() {
            row.notes.push("context_recall: no context retrieved".into());
        } else {
            match context_recall(&texts, &qa.reference_context, self.judge) {
                Ok(v) => row.context_recall = Some(v),
                Err(e) => row.notes.push(format!("context_recall: {e}")),
            }
        }

        let passages: Vec<ContextPassage> = context
            .iter()
            .map(|h| ContextPassage {
                chunk_id: h.chunk.chunk_id.clone(),
                doc_id: h.chunk.doc_id.clone(),
                title: self.bundle.document(&h.chunk.doc_id).map(|d| d.title.clone()).unwrap_or_default(),
                text: h.chunk.text.clone(),
            })
            .collect();
        let answer = assemble_prompt(&qa.question, &passages, cfg.language.template())
            .and_then(|prompt| generate_answer(self.generator, &prompt));
        let answer = match answer {
            Ok(a) => a,
            Err(e) => {
                row.notes.push(format!("generation: {e}"));
                return row;
            }
        };
        row.answer = Some(answer.clone());
        if answer.trim() == NO_CONTEXT {
            row.notes.push("generation: abstained (NO_CONTEXT)".into());
            return row;
        }

        match faithfulness(&answer, &texts, self.judge) {
            Ok(v) => row.faithfulness = Some(v),
            Err(e) => row.notes.push(format!("faithfulness: {e}")),
        }
        match answer_relevance(&qa.question, &answer, self.judge, self.provider, cfg.answer_relevance_n) {
            Ok(v) => row.answer_relevance = Some(v),
            Err(e) => row.notes.push(format!("answer_relevance: {e}")),
        }
        row
    }
}

/// Scores `qa` against an already built index. Per-question failures are
/// recorded in the rows; only setup problems abort the run.
pub fn evaluate_bundle(
    bundle: &IndexBundle,
    provider: &dyn EmbeddingProvider,
    qa: &[QaPair],
    config: &ExperimentConfig,
    exec: Execution,
) -> Result<EvaluationReport, ExperimentError> {
    config.validate()?;
    if qa.is_empty() {
        return Err(ExperimentError::EmptyBenchmark);
    }
    if bundle.vectors.provider_name() != provider.name() {
        return Err(ExperimentError::InvalidConfig(format!(
            "index was built with `{}` but the provider is `{}`",
            bundle.vectors.provider_name(),
            provider.name()
        )));
    }
    let generator = config.generator.build();
    let judge = config.judge.build();
    let stack = Stack {
        bundle,
        provider,
        generator: generator.as_ref(),
        judge: judge.as_ref(),
        config,
    };
    let rows = exec.map_indexed(qa.len(), |i| stack.evaluate(i + 1, &qa[i]));
    Ok(EvaluationReport {
        experiment_id: config.id.clone(),
        config: config.clone(),
        provider: provider.name().to_string(),
        num_chunks: bundle.vectors.len(),
        aggregates: Aggregates::from_rows(&rows),
        rows,
        runtime_ms: None,
    })
}

/// Chunks and indexes the corpus, then evaluates every QA pair.
pub fn run_experiment(
    corpus: &Corpus,
    qa: &[QaPair],
    config: &ExperimentConfig,
    exec: Execution,
) -> Result<EvaluationReport, ExperimentError> {
    config.validate()?;
    if qa.is_empty() {
        return Err(ExperimentError::EmptyBenchmark);
    }
    let provider = config.embedding.build();
    let bundle = IndexBundle::build_with(
        corpus.clone(),
        &config.chunking,
        provider.as_ref(),
        Some(config.embedding.clone()),
        exec,
    )?;
    evaluate_bundle(&bundle, provider.as_ref(), qa, config, exec)
}

/// Runs several experiments, building each distinct (chunking, embedder)
/// index once. Reports come back in input order.
pub fn run_grid(
    corpus: &Corpus,
    qa: &[QaPair],
    configs: &[ExperimentConfig],
    exec: Execution,
    timings: bool,
) -> Result<Vec<EvaluationReport>, ExperimentError> {
    if qa.is_empty() {
        return Err(ExperimentError::EmptyBenchmark);
    }
    for c in configs {
        c.validate()?;
    }
    let mut cache: BTreeMap<String, (std::sync::Arc<dyn EmbeddingProvider>, IndexBundle)> = BTreeMap::new();
    let mut reports = Vec::with_capacity(configs.len());
    for config in configs {
        let start = Instant::now();
        let key = serde_json::to_string(&(&config.chunking, &config.embedding)).expect("specs serialize");
        if !cache.contains_key(&key) {
            let provider = config.embedding.build();
            let bundle = IndexBundle::build_with(
                corpus.clone(),
                &config.chunking,
                provider.as_ref(),
                Some(config.embedding.clone()),
                exec,
            )?;
            cache.insert(key.clone(), (provider, bundle));
        }
        let (provider, bundle) = &cache[&key];
        let mut report = evaluate_bundle(bundle, provider.as_ref(), qa, config, exec)?;
        if timings {
            report.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        }
        reports.push(report);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::retrieval::Strategy;

    fn toy() -> (Corpus, Vec<QaPair>) {
        let corpus = Corpus::from_documents(vec![
            Document::new("fix", "Fixar a peça em formol tamponado a 10%. A fixação dura 24 horas.")
                .with_title("Fixação"),
            Document::new("cut", "Cortar os blocos no micrótomo a 4 micrómetros. Recolher os cortes em banho-maria.")
                .with_title("Microtomia"),
            Document::new("stain", "Corar com hematoxilina durante 5 minutos. Diferenciar em álcool ácido.")
                .with_title("Coloração"),
        ])
        .unwrap();
        let qa = |q: &str, r: &str, d: &str| QaPair {
            question: q.into(),
            ground_truth: r.into(),
            reference_context: r.into(),
            source_doc_id: d.into(),
            extra: Default::default(),
        };
        let pairs = vec![
            qa("Quanto tempo dura a fixação em formol?", "A fixação dura 24 horas.", "fix"),
            qa("A que espessura cortar no micrótomo?", "Cortar os blocos no micrótomo a 4 micrómetros.", "cut"),
        ];
        (corpus, pairs)
    }

    fn config(strategy: Strategy) -> ExperimentConfig {
        ExperimentConfig::deterministic(
            "t",
            ChunkingConfig::recursive(8, 2),
            RetrievalConfig::with_strategy(strategy),
        )
    }

    #[test]
    fn empty_benchmark() {
        let (corpus, _) = toy();
        let err = run_experiment(&corpus, &[], &config(Strategy::Hybrid), Execution::Sequential).unwrap_err();
        assert!(matches!(err, ExperimentError::EmptyBenchmark));
    }

    #[test]
    fn rows_are_consistent() {
        let (corpus, qa) = toy();
        for strategy in Strategy::ALL {
            let report = run_experiment(&corpus, &qa, &config(strategy), Execution::Parallel).unwrap();
            assert_eq!(report.rows.len(), 2);
            for row in &report.rows {
                for k in [1, 2, 4, 8] {
                    if let Some(p) = row.precision_at.get(&k) {
                        let r = row.recall_at[&k];
                        assert_eq!(row.f1_at[&k], super::super::metrics::f1(*p, r));
                    }
                }
                if row.answer.as_deref().is_some_and(|a| a != NO_CONTEXT) {
                    assert_eq!(row.faithfulness, Some(1.0), "{strategy} {row:?}");
                }
                assert!(row.context_chunk_ids.len() <= 3);
            }
        }
    }

    #[test]
    fn sequential_and_parallel_reports_match() {
        let (corpus, qa) = toy();
        let cfg = config(Strategy::Hybrid);
        let a = run_experiment(&corpus, &qa, &cfg, Execution::Sequential).unwrap();
        let b = run_experiment(&corpus, &qa, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn aggregates_skip_absent_values() {
        let mut a = MetricRow::empty(1);
        a.faithfulness = Some(1.0);
        a.precision_at.insert(1, 0.5);
        let mut b = MetricRow::empty(2);
        b.precision_at.insert(1, 0.0);
        b.notes.push("x".into());
        let agg = Aggregates::from_rows(&[a, b]);
        assert_eq!(agg.faithfulness, Some(1.0));
        assert_eq!(agg.answer_relevance, None);
        assert_eq!(agg.precision_at[&1], 0.25);
        assert_eq!(agg.rows_with_notes, 1);
    }

    #[test]
    fn invalid_ks() {
        let mut cfg = config(Strategy::Naive);
        cfg.ks = vec![1, 0];
        assert!(matches!(cfg.validate(), Err(ExperimentError::InvalidConfig(_))));
    }
}
