//! Service configuration: a TOML or JSON file, then `ENGINE_*` environment overrides.
//!
//! ```toml
//! index = "indexes/recursive-256"     # directory written by `labrag index`
//! corpus = "data/corpus.jsonl"        # indexed in memory when `index` is absent
//! listen = "127.0.0.1:8080"
//! static_dir = "webui/dist"
//! max_blocking = 32                   # concurrent engine calls
//!
//! [chunking]                          # used only for in-memory indexing
//! strategy = "recursive"
//! target_tokens = 256
//! overlap_tokens = 64
//!
//! [retrieval]                         # per-request defaults
//! strategy = "hybrid"
//! k = 3
//!
//! [embedding]                         # defaults to the provider in the index manifest
//! kind = "http"
//! base_url = "http://127.0.0.1:8081"
//! model = "paraphrase-multilingual-MiniLM-L12-v2"
//! dimension = 384
//!
//! [generator]
//! kind = "http"
//! base_url = "http://127.0.0.1:8000"
//! ```
//!
//! Environment overrides: `ENGINE_INDEX`, `ENGINE_CORPUS`, `ENGINE_LISTEN`,
//! `ENGINE_STATIC_DIR`, `ENGINE_MAX_BLOCKING`, `ENGINE_STRATEGY`, `ENGINE_K`,
//! `ENGINE_RERANK_THRESHOLD`, `ENGINE_DENSE_WEIGHT`, `ENGINE_SPARSE_WEIGHT`,
//! `ENGINE_PROVIDER` (`hash` or `http`), `ENGINE_PROVIDER_URL`,
//! `ENGINE_PROVIDER_MODEL`, `ENGINE_DIMENSION`, `ENGINE_GENERATOR` (`stub` or
//! `http`), `ENGINE_GENERATOR_URL`.

use std::path::{Path, PathBuf};

use labrag::chunking::ChunkingConfig;
use labrag::config::{GeneratorSpec, ProviderSpec};
use labrag::embedding::HttpEmbedderConfig;
use labrag::generation::HttpGeneratorConfig;
use labrag::retrieval::RetrievalConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{var}: {message}")]
    Env { var: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub corpus: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub chunking: ChunkingConfig,
    pub retrieval: RetrievalConfig,
    pub embedding: Option<ProviderSpec>,
    pub generator: GeneratorSpec,
    pub listen: String,
    pub static_dir: Option<PathBuf>,
    pub max_blocking: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            index: None,
            chunking: ChunkingConfig::recursive(256, 64),
            retrieval: RetrievalConfig::default(),
            embedding: None,
            generator: GeneratorSpec::Stub,
            listen: "127.0.0.1:8080".into(),
            static_dir: None,
            max_blocking: 32,
        }
    }
}

impl EngineConfig {
    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Applies `ENGINE_*` overrides from `vars`.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut provider_kind = None;
        let mut provider_url = None;
        let mut provider_model = None;
        let mut dimension = None;
        let mut generator_kind = None;
        let mut generator_url = None;
        for (var, value) in vars {
            let Some(key) = var.strip_prefix("ENGINE_") else {
                continue;
            };
            let err = |message: String| ConfigError::Env {
                var: var.clone(),
                message,
            };
            let number = |v: &str| v.parse::<f64>().map_err(|e| err(e.to_string()));
            let count = |v: &str| v.parse::<usize>().map_err(|e| err(e.to_string()));
            match key {
                "INDEX" => self.index = Some(value.into()),
                "CORPUS" => self.corpus = Some(value.into()),
                "LISTEN" => self.listen = value,
                "STATIC_DIR" => self.static_dir = Some(value.into()),
                "MAX_BLOCKING" => self.max_blocking = count(&value)?,
                "STRATEGY" => self.retrieval.strategy = value.parse().map_err(|e: labrag::retrieval::UnknownStrategy| err(e.to_string()))?,
                "K" => self.retrieval.k = count(&value)?,
                "RERANK_THRESHOLD" => self.retrieval.rerank_threshold = number(&value)?,
                "DENSE_WEIGHT" => self.retrieval.dense_weight = number(&value)?,
                "SPARSE_WEIGHT" => self.retrieval.sparse_weight = number(&value)?,
                "PROVIDER" => provider_kind = Some(value),
                "PROVIDER_URL" => provider_url = Some(value),
                "PROVIDER_MODEL" => provider_model = Some(value),
                "DIMENSION" => dimension = Some(count(&value)?),
                "GENERATOR" => generator_kind = Some(value),
                "GENERATOR_URL" => generator_url = Some(value),
                _ => {}
            }
        }

        let current = self.embedding.clone();
        let kind = provider_kind.or_else(|| match (&current, &provider_url) {
            (Some(ProviderSpec::Http(_)), _) | (None, Some(_)) => Some("http".into()),
            (Some(ProviderSpec::Hash { .. }), _) => Some("hash".into()),
            (None, None) => dimension.map(|_| "hash".to_string()),
        });
        match kind.as_deref() {
            None => {}
            Some("hash") => {
                let (d, seed) = match current {
                    Some(ProviderSpec::Hash { dimension, seed }) => (dimension, seed),
                    _ => (384, 0),
                };
                self.embedding = Some(ProviderSpec::Hash {
                    dimension: dimension.unwrap_or(d),
                    seed,
                });
            }
            Some("http") => {
                let mut cfg = match current {
                    Some(ProviderSpec::Http(cfg)) => cfg,
                    _ => HttpEmbedderConfig::new("", "", 384),
                };
                if let Some(url) = provider_url {
                    cfg.base_url = url;
                }
                if let Some(model) = provider_model {
                    cfg.model = model;
                }
                if let Some(d) = dimension {
                    cfg.dimension = d;
                }
                if cfg.base_url.is_empty() || cfg.model.is_empty() {
                    return Err(ConfigError::Env {
                        var: "ENGINE_PROVIDER".into(),
                        message: "an http provider needs ENGINE_PROVIDER_URL and ENGINE_PROVIDER_MODEL".into(),
                    });
                }
                self.embedding = Some(ProviderSpec::Http(cfg));
            }
            Some(other) => {
                return Err(ConfigError::Env {
                    var: "ENGINE_PROVIDER".into(),
                    message: format!("unknown provider kind `{other}`"),
                })
            }
        }

        match (generator_kind.as_deref(), generator_url) {
            (Some("stub"), _) => self.generator = GeneratorSpec::Stub,
            (Some("http") | None, Some(url)) => {
                let mut cfg = match &self.generator {
                    GeneratorSpec::Http(cfg) => cfg.clone(),
                    GeneratorSpec::Stub => HttpGeneratorConfig::new(""),
                };
                cfg.base_url = url;
                self.generator = GeneratorSpec::Http(cfg);
            }
            (Some("http"), None) if !matches!(self.generator, GeneratorSpec::Http(_)) => {
                return Err(ConfigError::Env {
                    var: "ENGINE_GENERATOR".into(),
                    message: "an http generator needs ENGINE_GENERATOR_URL".into(),
                })
            }
            (Some("http"), None) | (None, None) => {}
            (Some(other), _) => {
                return Err(ConfigError::Env {
                    var: "ENGINE_GENERATOR".into(),
                    message: format!("unknown generator kind `{other}`"),
                })
            }
        }
        Ok(())
    }
}
