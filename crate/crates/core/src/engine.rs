//! Query engine shared by the CLI and the HTTP service.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{GeneratorSpec, ProviderSpec};
use crate::embedding::{EmbeddingError, EmbeddingProvider};
use crate::generation::{assemble_prompt, generate_answer, ContextPassage, GenerationError, Generator};
use crate::index::{load_index, IndexBundle, IndexError, Manifest};
use crate::retrieval::{retrieve, RetrievalConfig, RetrievalError, Strategy};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("index was built with `{index}` but the configured provider is `{configured}`")]
    ProviderMismatch { index: String, configured: String },
    #[error("index dimension {index} does not match provider dimension {configured}")]
    DimensionMismatch { index: usize, configured: usize },
    #[error("no provider configured and the index does not record one")]
    UnknownProvider,
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// How a failed query should be reported to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed request or unknown strategy.
    BadRequest,
    /// Well-formed request with an unusable value, such as `k < 1`.
    Unprocessable,
    /// The embedding provider or generator could not be reached.
    Unavailable,
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{stage} stage unavailable: {message}")]
    Unavailable { stage: &'static str, message: String },
    #[error("{0}")]
    Internal(String),
}

impl QueryError {
    pub fn class(&self) -> ErrorClass {
        match self {
            Self::BadRequest(_) => ErrorClass::BadRequest,
            Self::Unprocessable(_) => ErrorClass::Unprocessable,
            Self::Unavailable { .. } => ErrorClass::Unavailable,
            Self::Internal(_) => ErrorClass::Internal,
        }
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Self::Unavailable { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

impl From<RetrievalError> for QueryError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Embedding(EmbeddingError::Failure(m)) => Self::Unavailable { stage: "embed", message: m },
            RetrievalError::Embedding(e @ EmbeddingError::EmptyInput) => Self::BadRequest(e.to_string()),
            other => Self::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub generate: bool,
}

impl QueryRequest {
    pub fn new(question: impl Into<String>) -> Self {
        Self {
            question: question.into(),
            strategy: None,
            k: None,
            generate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub title: String,
    pub category: String,
    pub text: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub chunks: Vec<SourceChunk>,
    pub strategy: Strategy,
    pub k: usize,
    pub timings_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineStats {
    pub num_docs: usize,
    pub num_chunks: usize,
    pub provider: String,
    pub defaults: RetrievalConfig,
}

pub struct Engine {
    bundle: IndexBundle,
    provider: Arc<dyn EmbeddingProvider>,
    generator: Arc<dyn Generator>,
    defaults: RetrievalConfig,
    template: String,
}

impl Engine {
    pub fn new(
        bundle: IndexBundle,
        provider: Arc<dyn EmbeddingProvider>,
        generator: Arc<dyn Generator>,
        defaults: RetrievalConfig,
    ) -> Result<Self, EngineError> {
        let index = bundle.vectors.provider_name();
        if index != provider.name() {
            return Err(EngineError::ProviderMismatch {
                index: index.to_string(),
                configured: provider.name().to_string(),
            });
        }
        if bundle.vectors.dimension() != provider.dimension() {
            return Err(EngineError::DimensionMismatch {
                index: bundle.vectors.dimension(),
                configured: provider.dimension(),
            });
        }
        defaults.validate()?;
        Ok(Self {
            bundle,
            provider,
            generator,
            defaults,
            template: crate::generation::DEFAULT_TEMPLATE_EN.to_string(),
        })
    }

    /// Loads an index directory. Without an explicit provider the one recorded
    /// in the manifest is used.
    pub fn open(
        dir: impl AsRef<Path>,
        provider: Option<&ProviderSpec>,
        generator: &GeneratorSpec,
        defaults: RetrievalConfig,
    ) -> Result<(Self, Manifest), EngineError> {
        let (bundle, manifest) = load_index(dir)?;
        let spec = provider
            .or(bundle.provider_spec.as_ref())
            .ok_or(EngineError::UnknownProvider)?;
        let provider = spec.build();
        Ok((Self::new(bundle, provider, generator.build(), defaults)?, manifest))
    }

    pub fn with_template(mut self, template: impl Into<String>) -> Self {
        self.template = template.into();
        self
    }

    pub fn bundle(&self) -> &IndexBundle {
        &self.bundle
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        self.provider.as_ref()
    }

    pub fn defaults(&self) -> &RetrievalConfig {
        &self.defaults
    }

    pub fn stats(&self) -> EngineStats {
        EngineStats {
            num_docs: self.bundle.corpus.len(),
            num_chunks: self.bundle.vectors.len(),
            provider: self.provider.name().to_string(),
            defaults: self.defaults.clone(),
        }
    }

    /// Retrieval config for a request: per-request overrides over the defaults.
    pub fn effective_config(&self, request: &QueryRequest) -> RetrievalConfig {
        RetrievalConfig {
            strategy: request.strategy.unwrap_or(self.defaults.strategy),
            k: request.k.unwrap_or(self.defaults.k),
            ..self.defaults.clone()
        }
    }

    pub fn query(&self, request: &QueryRequest) -> Result<QueryResponse, QueryError> {
        let started = Instant::now();
        if request.question.trim().is_empty() {
            return Err(QueryError::BadRequest("question must not be empty".into()));
        }
        let config = self.effective_config(request);
        if config.k == 0 {
            return Err(QueryError::Unprocessable("k must be at least 1".into()));
        }
        let result = retrieve(
            &request.question,
            &self.bundle.vectors,
            &self.bundle.bm25,
            self.provider.as_ref(),
            &config,
        )?;
        let mut timings = result.timings_ms;
        let chunks: Vec<SourceChunk> = result
            .hits
            .iter()
            .map(|h| {
                let doc = self.bundle.document(&h.chunk.doc_id);
                SourceChunk {
                    chunk_id: h.chunk.chunk_id.clone(),
                    doc_id: h.chunk.doc_id.clone(),
                    title: doc.map(|d| d.title.clone()).unwrap_or_default(),
                    category: doc.map(|d| d.category.clone()).unwrap_or_default(),
                    text: h.chunk.text.clone(),
                    score: h.hit.score,
                    rank: h.hit.rank,
                }
            })
            .collect();

        let answer = if request.generate {
            let t = Instant::now();
            let passages: Vec<ContextPassage> = chunks
                .iter()
                .map(|c| ContextPassage {
                    chunk_id: c.chunk_id.clone(),
                    doc_id: c.doc_id.clone(),
                    title: c.title.clone(),
                    text: c.text.clone(),
                })
                .collect();
            let prompt = assemble_prompt(&request.question, &passages, &self.template)
                .map_err(|e| QueryError::Internal(e.to_string()))?;
            let answer = generate_answer(self.generator.as_ref(), &prompt).map_err(|e| match e {
                GenerationError::Failure(m) => QueryError::Unavailable { stage: "generate", message: m },
                GenerationError::Template(m) => QueryError::Internal(m),
            })?;
            timings.insert("generate".into(), t.elapsed().as_secs_f64() * 1e3);
            Some(answer)
        } else {
            None
        };
        timings.insert("total".into(), started.elapsed().as_secs_f64() * 1e3);
        Ok(QueryResponse {
            answer,
            chunks,
            strategy: config.strategy,
            k: config.k,
            timings_ms: timings,
        })
    }
}
