use std::collections::HashSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ConcurrencyLimit, Prompt};
use crate::chunking::{is_content_token, split_sentences, tokenize};
use crate::http::JsonClient;

/// Answer the extractive generator gives when it has nothing to extract from.
pub const NO_CONTEXT: &str = "NO_CONTEXT";

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error("template error: {0}")]
    Template(String),
    #[error("generation failure: {0}")]
    Failure(String),
}

pub trait Generator: Send + Sync {
    fn name(&self) -> &str;
    fn generate(&self, prompt: &Prompt) -> Result<String, GenerationError>;
}

/// Calls the generator and enforces non-empty input and output.
pub fn generate_answer(generator: &dyn Generator, prompt: &Prompt) -> Result<String, GenerationError> {
    if prompt.text.trim().is_empty() {
        return Err(GenerationError::Failure("empty prompt".into()));
    }
    let answer = generator.generate(prompt)?;
    if answer.trim().is_empty() {
        return Err(GenerationError::Failure(format!("{} returned an empty answer", generator.name())));
    }
    Ok(answer)
}

/// Deterministic stand-in for an LLM: answers with the context sentence that
/// shares the most distinct content tokens with the question, earliest first
/// on ties, or [`NO_CONTEXT`] when the prompt carries no passages.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractiveGenerator;

impl Generator for ExtractiveGenerator {
    fn name(&self) -> &str {
        "extractive-stub"
    }

    fn generate(&self, prompt: &Prompt) -> Result<String, GenerationError> {
        let question: HashSet<String> = tokenize(&prompt.question)
            .into_iter()
            .filter(|t| is_content_token(t))
            .collect();
        let mut best: Option<(usize, String)> = None;
        for passage in &prompt.passages {
            for sentence in split_sentences(&passage.text) {
                let text = sentence.text.trim();
                if text.is_empty() {
                    continue;
                }
                let tokens: HashSet<String> = tokenize(text).into_iter().collect();
                let overlap = question.iter().filter(|t| tokens.contains(*t)).count();
                if best.as_ref().is_none_or(|(b, _)| overlap > *b) {
                    best = Some((overlap, text.to_string()));
                }
            }
        }
        Ok(best.map_or_else(|| NO_CONTEXT.to_string(), |(_, s)| s))
    }
}

/// Wire protocol: `POST {base_url}/generate` with
/// `{"prompt": str, "max_tokens": int, ..options}` answered by `{"text": str}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpGeneratorConfig {
    pub base_url: String,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    /// Decoding parameters passed through untouched (temperature, ...).
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub options: Map<String, Value>,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_model() -> String {
    "http-generator".into()
}
fn default_max_tokens() -> u32 {
    512
}
fn default_concurrency() -> usize {
    2
}
fn default_timeout_secs() -> u64 {
    300
}

impl HttpGeneratorConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: default_model(),
            max_tokens: default_max_tokens(),
            options: Map::new(),
            max_concurrency: default_concurrency(),
            timeout_secs: default_timeout_secs(),
        }
    }
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

pub struct HttpGenerator {
    config: HttpGeneratorConfig,
    client: JsonClient,
    limit: ConcurrencyLimit,
}

impl HttpGenerator {
    pub fn new(config: HttpGeneratorConfig) -> Self {
        let client = JsonClient::new(&config.base_url, Duration::from_secs(config.timeout_secs));
        let limit = ConcurrencyLimit::new(config.max_concurrency);
        Self { config, client, limit }
    }
}

impl Generator for HttpGenerator {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn generate(&self, prompt: &Prompt) -> Result<String, GenerationError> {
        let mut body = self.config.options.clone();
        body.insert("prompt".into(), Value::from(prompt.text.as_str()));
        body.insert("max_tokens".into(), Value::from(self.config.max_tokens));
        let _permit = self.limit.acquire();
        let response: GenerateResponse = self
            .client
            .post("/generate", &body)
            .map_err(|e| GenerationError::Failure(e.to_string()))?;
        Ok(response.text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{assemble_prompt, ContextPassage, DEFAULT_TEMPLATE_EN};

    fn prompt(question: &str, texts: &[&str]) -> Prompt {
        let passages: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| ContextPassage {
                chunk_id: format!("d#{i}"),
                doc_id: "d".into(),
                title: "T".into(),
                text: t.to_string(),
            })
            .collect();
        assemble_prompt(question, &passages, DEFAULT_TEMPLATE_EN).unwrap()
    }

    /// Exhaustive scan, written independently of the generator.
    fn oracle(question: &str, texts: &[&str]) -> String {
        let q: Vec<String> = {
            let mut v: Vec<String> = tokenize(question).into_iter().filter(|t| t.chars().all(char::is_alphanumeric)).collect();
            v.sort();
            v.dedup();
            v
        };
        let mut all = Vec::new();
        for t in texts {
            for s in split_sentences(t) {
                let s = s.text.trim().to_string();
                if !s.is_empty() {
                    all.push(s);
                }
            }
        }
        let score = |s: &String| {
            let toks = tokenize(s);
            q.iter().filter(|w| toks.contains(w)).count()
        };
        let max = all.iter().map(score).max().unwrap();
        all.into_iter().find(|s| score(s) == max).unwrap()
    }

    #[test]
    fn picks_max_overlap_sentence() {
        let texts = [
            "Ligar o micrótomo. Verificar a navalha antes do corte.",
            "A espessura do corte é de 4 micrómetros. Limpar a navalha.",
        ];
        let q = "Qual a espessura do corte no micrótomo?";
        let got = ExtractiveGenerator.generate(&prompt(q, &texts)).unwrap();
        assert_eq!(got, oracle(q, &texts));
        assert_eq!(got, "A espessura do corte é de 4 micrómetros.");
    }

    #[test]
    fn ties_go_to_earliest() {
        let texts = ["Corar com eosina. Corar com hematoxilina."];
        let got = ExtractiveGenerator.generate(&prompt("corar", &texts)).unwrap();
        assert_eq!(got, "Corar com eosina.");
    }

    #[test]
    fn no_context() {
        assert_eq!(ExtractiveGenerator.generate(&prompt("q", &[])).unwrap(), NO_CONTEXT);
    }

    #[test]
    fn empty_prompt_rejected() {
        assert!(matches!(
            generate_answer(&ExtractiveGenerator, &Prompt::plain("  ")),
            Err(GenerationError::Failure(_))
        ));
    }
}
