//! Serializable descriptions of the pluggable models.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingProvider, HashEmbedder, HttpEmbedder, HttpEmbedderConfig};
use crate::evaluation::{ContainmentJudge, Judge, LlmJudge, DEFAULT_TAU};
use crate::generation::{ExtractiveGenerator, Generator, HttpGenerator, HttpGeneratorConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderSpec {
    Hash {
        #[serde(default = "default_dimension")]
        dimension: usize,
        #[serde(default)]
        seed: u64,
    },
    Http(HttpEmbedderConfig),
}

fn default_dimension() -> usize {
    384
}

impl Default for ProviderSpec {
    fn default() -> Self {
        Self::Hash {
            dimension: default_dimension(),
            seed: 0,
        }
    }
}

impl ProviderSpec {
    pub fn build(&self) -> Arc<dyn EmbeddingProvider> {
        match self {
            Self::Hash { dimension, seed } => Arc::new(HashEmbedder::new(*dimension, *seed)),
            Self::Http(cfg) => Arc::new(HttpEmbedder::new(cfg.clone())),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::Hash { dimension, .. } => *dimension,
            Self::Http(cfg) => cfg.dimension,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorSpec {
    /// Deterministic extractive answerer.
    #[default]
    Stub,
    Http(HttpGeneratorConfig),
}

impl GeneratorSpec {
    pub fn build(&self) -> Arc<dyn Generator> {
        match self {
            Self::Stub => Arc::new(ExtractiveGenerator),
            Self::Http(cfg) => Arc::new(HttpGenerator::new(cfg.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum JudgeSpec {
    Containment {
        #[serde(default = "default_tau")]
        tau: f64,
    },
    Llm { generator: GeneratorSpec },
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

impl Default for JudgeSpec {
    fn default() -> Self {
        Self::Containment { tau: DEFAULT_TAU }
    }
}

impl JudgeSpec {
    pub fn build(&self) -> Arc<dyn Judge> {
        match self {
            Self::Containment { tau } => Arc::new(ContainmentJudge::new(*tau)),
            Self::Llm { generator } => Arc::new(LlmJudge::new(generator.build())),
        }
    }
}
