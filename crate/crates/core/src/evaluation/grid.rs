//! Experiment grids described in TOML.
//!
//! ```toml
//! [defaults]
//! ks = [1, 2, 4, 8]
//! [defaults.retrieval]
//! k = 3
//!
//! [chunking.recursive-256]
//! strategy = "recursive"
//! target_tokens = 256
//! overlap_tokens = 64
//!
//! [embedders.general]
//! kind = "http"
//! base_url = "http://localhost:8081"
//! model = "paraphrase-multilingual-MiniLM-L12-v2"
//! dimension = 384
//!
//! [[experiment]]
//! id = "exp1"
//! description = "Naive, recursive ~256"
//! chunking = "recursive-256"
//! strategy = "naive"
//! embedder = "general"
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentConfig, ExperimentError};
use super::metrics::TopKMode;
use crate::chunking::ChunkingConfig;
use crate::config::{GeneratorSpec, JudgeSpec, ProviderSpec};
use crate::generation::PromptLanguage;
use crate::retrieval::{RetrievalConfig, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDefaults {
    #[serde(default)]
    pub retrieval: RetrievalConfig,
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

fn default_ks() -> Vec<usize> {
    vec![1, 2, 4, 8]
}

fn default_n() -> usize {
    3
}

impl Default for GridDefaults {
    fn default() -> Self {
        Self {
            retrieval: RetrievalConfig::default(),
            generator: GeneratorSpec::default(),
            judge: JudgeSpec::default(),
            ks: default_ks(),
            answer_relevance_n: default_n(),
            topk_mode: TopKMode::default(),
            language: PromptLanguage::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRow {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub chunking: String,
    pub strategy: Strategy,
    pub embedder: String,
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub defaults: GridDefaults,
    pub chunking: BTreeMap<String, ChunkingConfig>,
    pub embedders: BTreeMap<String, ProviderSpec>,
    #[serde(rename = "experiment")]
    pub experiments: Vec<GridRow>,
}

impl Grid {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let grid: Grid = toml::from_str(text).map_err(|e| ExperimentError::Grid(e.to_string()))?;
        grid.configs()?;
        Ok(grid)
    }

    /// Replaces every embedder with a hash embedder of `dimension`. Slots get
    /// distinct seeds (their position in name order) so they stay distinguishable.
    pub fn with_hash_embedders(mut self, dimension: usize) -> Self {
        for (seed, spec) in self.embedders.values_mut().enumerate() {
            *spec = ProviderSpec::Hash {
                dimension,
                seed: seed as u64,
            };
        }
        self
    }

    /// One validated config per row, in file order.
    pub fn configs(&self) -> Result<Vec<ExperimentConfig>, ExperimentError> {
        if self.experiments.is_empty() {
            return Err(ExperimentError::Grid("no [[experiment]] rows".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        self.experiments
            .iter()
            .map(|row| {
                if !seen.insert(row.id.as_str()) {
                    return Err(ExperimentError::Grid(format!("duplicate experiment id `{}`", row.id)));
                }
                let chunking = self.chunking.get(&row.chunking).ok_or_else(|| {
                    ExperimentError::Grid(format!("{}: unknown chunking preset `{}`", row.id, row.chunking))
                })?;
                let embedding = self.embedders.get(&row.embedder).ok_or_else(|| {
                    ExperimentError::Grid(format!("{}: unknown embedder `{}`", row.id, row.embedder))
                })?;
                let d = &self.defaults;
                let config = ExperimentConfig {
                    id: row.id.clone(),
                    description: row.description.clone(),
                    chunking: chunking.clone(),
                    retrieval: RetrievalConfig {
                        strategy: row.strategy,
                        k: row.k.unwrap_or(d.retrieval.k),
                        ..d.retrieval.clone()
                    },
                    embedding: embedding.clone(),
                    generator: d.generator.clone(),
                    judge: d.judge.clone(),
                    ks: d.ks.clone(),
                    answer_relevance_n: d.answer_relevance_n,
                    topk_mode: d.topk_mode,
                    language: d.language,
                };
                config.validate()?;
                Ok(config)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: &str = r#"
[chunking.small]
strategy = "recursive"
target_tokens = 16
overlap_tokens = 4

[embedders.a]
kind = "hash"
dimension = 64

[embedders.b]
kind = "http"
base_url = "http://127.0.0.1:1"
model = "m"
dimension = 64

[[experiment]]
id = "e1"
chunking = "small"
strategy = "naive"
embedder = "a"

[[experiment]]
id = "e2"
chunking = "small"
strategy = "hybrid"
embedder = "b"
k = 5
"#;

    #[test]
    fn parses_rows_in_order() {
        let grid = Grid::parse(GRID).unwrap();
        let configs = grid.configs().unwrap();
        assert_eq!(configs.iter().map(|c| c.id.as_str()).collect::<Vec<_>>(), ["e1", "e2"]);
        assert_eq!(configs[0].retrieval.k, 3);
        assert_eq!(configs[1].retrieval.k, 5);
        assert_eq!(configs[1].retrieval.strategy, Strategy::Hybrid);
        assert_eq!(configs[0].ks, vec![1, 2, 4, 8]);
    }

    #[test]
    fn hash_override_keeps_slots_distinct() {
        let configs = Grid::parse(GRID).unwrap().with_hash_embedders(32).configs().unwrap();
        assert_eq!(configs[0].embedding, ProviderSpec::Hash { dimension: 32, seed: 0 });
        assert_eq!(configs[1].embedding, ProviderSpec::Hash { dimension: 32, seed: 1 });
    }

    #[test]
    fn rejects_bad_references() {
        assert!(Grid::parse(&GRID.replace("embedder = \"b\"", "embedder = \"zzz\"")).is_err());
        assert!(Grid::parse(&GRID.replace("id = \"e2\"", "id = \"e1\"")).is_err());
        assert!(Grid::parse(&GRID.replace("strategy = \"naive\"", "strategy = \"teleport\"")).is_err());
        assert!(Grid::parse(&GRID.replace("k = 5", "k = 0")).is_err());
    }
}
