//! Protocol corpus and QA benchmark loading.
//!
//! Both files are UTF-8 JSONL, one object per line. Blank lines are skipped;
//! every other line must decode to a JSON object. Fields the loader does not
//! know about are kept in an opaque `extra` map so a loaded corpus can be
//! written back without loss.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed line: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: invalid field `{field}`: {reason}")]
    InvalidField {
        line: usize,
        field: &'static str,
        reason: String,
    },
    #[error("line {line}: duplicate document id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: unknown document `{doc_id}`")]
    UnknownDocument { line: usize, doc_id: String },
}

/// One protocol document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub category: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            category: String::new(),
            title: String::new(),
            keywords: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }
}

/// A benchmark question with its ground truth and reference context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub ground_truth: String,
    pub reference_context: String,
    pub source_doc_id: String,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

/// An ordered, id-unique collection of documents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus from documents, enforcing the same invariants as the loader.
    pub fn from_documents(documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            let line = i + 1;
            if doc.id.is_empty() {
                return Err(CorpusError::InvalidField {
                    line,
                    field: "id",
                    reason: "must be non-empty".into(),
                });
            }
            if doc.text.is_empty() {
                return Err(CorpusError::InvalidField {
                    line,
                    field: "text",
                    reason: "must be non-empty".into(),
                });
            }
            if by_id.insert(doc.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId {
                    line,
                    id: doc.id.clone(),
                });
            }
        }
        Ok(Self { documents, by_id })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.documents[i])
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Writes the corpus as JSONL, one document per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for doc in &self.documents {
            serde_json::to_writer(&mut out, doc)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CorpusError> {
    std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

type NumberedObject = (usize, Map<String, Value>);

/// Splits raw bytes into (1-based line number, decoded object) pairs.
fn json_lines(bytes: &[u8]) -> Result<Vec<NumberedObject>, CorpusError> {
    let mut out = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let text = std::str::from_utf8(raw).map_err(|e| CorpusError::MalformedLine {
            line,
            reason: format!("invalid UTF-8: {e}"),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(map)) => out.push((line, map)),
            Ok(_) => {
                return Err(CorpusError::MalformedLine {
                    line,
                    reason: "expected a JSON object".into(),
                })
            }
            Err(e) => {
                return Err(CorpusError::MalformedLine {
                    line,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

fn required_string(
    map: &mut Map<String, Value>,
    line: usize,
    field: &'static str,
) -> Result<String, CorpusError> {
    match map.remove(field) {
        None | Some(Value::Null) => Err(CorpusError::MissingField { line, field }),
        Some(Value::String(s)) if s.is_empty() => Err(CorpusError::InvalidField {
            line,
            field,
            reason: "must be non-empty".into(),
        }),
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(CorpusError::InvalidField {
            line,
            field,
            reason: format!("expected string, found {}", type_name(&other)),
        }),
    }
}

fn optional_string(
    map: &mut Map<String, Value>,
    line: usize,
    field: &'static str,
) -> Result<String, CorpusError> {
    match map.remove(field) {
        None | Some(Value::Null) => Ok(String::new()),
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(CorpusError::InvalidField {
            line,
            field,
            reason: format!("expected string, found {}", type_name(&other)),
        }),
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn keywords(map: &mut Map<String, Value>, line: usize) -> Result<Vec<String>, CorpusError> {
    let invalid = |reason: &str| CorpusError::InvalidField {
        line,
        field: "keywords",
        reason: reason.into(),
    };
    match map.remove("keywords") {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|item| match item {
                Value::String(s) => Ok(s),
                _ => Err(invalid("expected an array of strings")),
            })
            .collect(),
        Some(_) => Err(invalid("expected an array of strings")),
    }
}

/// Parses corpus JSONL from memory.
pub fn parse_corpus(bytes: &[u8]) -> Result<Corpus, CorpusError> {
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for (line, mut map) in json_lines(bytes)? {
        let id = required_string(&mut map, line, "id")?;
        let text = required_string(&mut map, line, "text")?;
        let category = optional_string(&mut map, line, "category")?;
        let title = optional_string(&mut map, line, "title")?;
        let keywords = keywords(&mut map, line)?;
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { line, id });
        }
        documents.push(Document {
            id,
            text,
            category,
            title,
            keywords,
            extra: map.into_iter().collect(),
        });
    }
    Corpus::from_documents(documents)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    parse_corpus(&read_file(path.as_ref())?)
}

/// Parses QA JSONL from memory, resolving every `source_doc_id` against `corpus`.
pub fn parse_qa(bytes: &[u8], corpus: &Corpus) -> Result<Vec<QaPair>, CorpusError> {
    let mut pairs = Vec::new();
    for (line, mut map) in json_lines(bytes)? {
        let question = required_string(&mut map, line, "question")?;
        let ground_truth = required_string(&mut map, line, "ground_truth")?;
        let reference_context = required_string(&mut map, line, "reference_context")?;
        let source_doc_id = required_string(&mut map, line, "source_doc_id")?;
        if corpus.get(&source_doc_id).is_none() {
            return Err(CorpusError::UnknownDocument {
                line,
                doc_id: source_doc_id,
            });
        }
        pairs.push(QaPair {
            question,
            ground_truth,
            reference_context,
            source_doc_id,
            extra: map.into_iter().collect(),
        });
    }
    Ok(pairs)
}

pub fn load_qa(path: impl AsRef<Path>, corpus: &Corpus) -> Result<Vec<QaPair>, CorpusError> {
    parse_qa(&read_file(path.as_ref())?, corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"{"id":"p1","text":"Fixar em formol.","category":"histologia","title":"Fixação","keywords":["formol"]}"#;

    #[test]
    fn single_line_corpus() {
        let corpus = parse_corpus(ONE.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 1);
        let doc = corpus.get("p1").unwrap();
        assert_eq!(doc.title, "Fixação");
        assert_eq!(doc.keywords, vec!["formol"]);
    }

    #[test]
    fn duplicate_id_rejected() {
        let input = format!("{ONE}\n{ONE}\n");
        match parse_corpus(input.as_bytes()) {
            Err(CorpusError::DuplicateId { line: 2, id }) => assert_eq!(id, "p1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_fields() {
        let err = parse_corpus(br#"{"text":"x"}"#).unwrap_err();
        assert!(matches!(err, CorpusError::MissingField { field: "id", .. }));
        let err = parse_corpus(br#"{"id":"a"}"#).unwrap_err();
        assert!(matches!(err, CorpusError::MissingField { field: "text", .. }));
    }

    #[test]
    fn malformed_json_and_bad_utf8() {
        let err = parse_corpus(b"{not json}").unwrap_err();
        assert!(matches!(err, CorpusError::MalformedLine { line: 1, .. }));
        let mut bytes = br#"{"id":"a","text":"caf"#.to_vec();
        bytes.push(0xE9); // latin-1 é
        bytes.extend_from_slice(br#""}"#);
        let err = parse_corpus(&bytes).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedLine { line: 1, .. }));
    }

    #[test]
    fn keywords_default_to_empty_and_extras_survive() {
        let corpus = parse_corpus(br#"{"id":"a","text":"t","revision":3}"#).unwrap();
        let doc = &corpus.documents()[0];
        assert!(doc.keywords.is_empty());
        assert_eq!(doc.extra["revision"], Value::from(3));
    }

    #[test]
    fn qa_resolves_source_documents() {
        let corpus = parse_corpus(ONE.as_bytes()).unwrap();
        let ok = r#"{"question":"q?","ground_truth":"g","reference_context":"r","source_doc_id":"p1"}"#;
        assert_eq!(parse_qa(ok.as_bytes(), &corpus).unwrap().len(), 1);
        let bad = ok.replace("p1", "zzz");
        match parse_qa(bad.as_bytes(), &corpus) {
            Err(CorpusError::UnknownDocument { doc_id, line: 1 }) => assert_eq!(doc_id, "zzz"),
            other => panic!("unexpected {other:?}"),
        }
        let missing = r#"{"question":"q?","ground_truth":"g","source_doc_id":"p1"}"#;
        assert!(matches!(
            parse_qa(missing.as_bytes(), &corpus),
            Err(CorpusError::MissingField {
                field: "reference_context",
                ..
            })
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let input = format!(
            "{ONE}\n{}\n",
            r#"{"id":"p2","text":"Lavar.","category":"c","title":"t","keywords":[],"x":{"y":[1,2]}}"#
        );
        let corpus = parse_corpus(input.as_bytes()).unwrap();
        let mut buf = Vec::new();
        corpus.write_jsonl(&mut buf).unwrap();
        assert_eq!(parse_corpus(&buf).unwrap(), corpus);
    }
}
