//! Client for an external embedding server.
//!
//! Wire protocol: `POST {base_url}/embed` with `{"texts": [str]}`, answered by
//! `{"vectors": [[number]]}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingProvider, EmbeddingVector};
use crate::http::JsonClient;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEmbedderConfig {
    pub base_url: String,
    /// Model identity recorded in index manifests.
    pub model: String,
    pub dimension: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_batch_size() -> usize {
    32
}
fn default_concurrency() -> usize {
    4
}
fn default_timeout_secs() -> u64 {
    60
}

impl HttpEmbedderConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, dimension: usize) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            dimension,
            batch_size: default_batch_size(),
            max_concurrency: default_concurrency(),
            timeout_secs: default_timeout_secs(),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

pub struct HttpEmbedder {
    config: HttpEmbedderConfig,
    client: JsonClient,
}

impl HttpEmbedder {
    pub fn new(config: HttpEmbedderConfig) -> Self {
        let client = JsonClient::new(&config.base_url, Duration::from_secs(config.timeout_secs));
        Self { config, client }
    }

    fn embed_one_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let response: EmbedResponse = self
            .client
            .post("/embed", &EmbedRequest { texts })
            .map_err(|e| EmbeddingError::Failure(e.to_string()))?;
        if response.vectors.len() != texts.len() {
            return Err(EmbeddingError::Failure(format!(
                "{} returned {} vectors for {} texts",
                self.config.model,
                response.vectors.len(),
                texts.len()
            )));
        }
        Ok(response.vectors.into_iter().map(EmbeddingVector::new).collect())
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    /// Splits the input into batches and keeps at most `max_concurrency`
    /// requests in flight. Output order follows input order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let batches: Vec<&[&str]> = texts.chunks(self.config.batch_size.max(1)).collect();
        let mut out = Vec::with_capacity(texts.len());
        for wave in batches.chunks(self.config.max_concurrency.max(1)) {
            let results: Vec<_> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|batch| scope.spawn(move || self.embed_one_batch(batch)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| {
                        h.join().unwrap_or_else(|_| {
                            Err(EmbeddingError::Failure("embedding worker panicked".into()))
                        })
                    })
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}
