use std::fmt;
use std::path::Path;

use labrag::chunking::ChunkingError;
use labrag::corpus::CorpusError;
use labrag::engine::{EngineError, ErrorClass, QueryError};
use labrag::evaluation::ExperimentError;
use labrag::index::IndexError;
use labrag_service::ServiceError;

/// A failed command. User errors exit with 1, provider and infrastructure
/// errors with 2.
#[derive(Debug)]
pub enum Failure {
    User(String),
    Infra(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::User(_) => 1,
            Failure::Infra(_) => 2,
        }
    }

    pub fn corpus(path: &Path, e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => Failure::User(e.to_string()),
            other => Failure::User(format!("{}: {other}", path.display())),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::User(m) | Failure::Infra(m) => f.write_str(m),
        }
    }
}

impl From<IndexError> for Failure {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::Embedding(_) | IndexError::Chunking(ChunkingError::Embedding { .. }) => {
                Failure::Infra(e.to_string())
            }
            other => Failure::User(other.to_string()),
        }
    }
}

impl From<ChunkingError> for Failure {
    fn from(e: ChunkingError) -> Self {
        IndexError::Chunking(e).into()
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Index(e) => e.into(),
            other => Failure::User(other.to_string()),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Index(e) => e.into(),
            other => Failure::User(other.to_string()),
        }
    }
}

impl From<QueryError> for Failure {
    fn from(e: QueryError) -> Self {
        match e.class() {
            ErrorClass::BadRequest | ErrorClass::Unprocessable => Failure::User(e.to_string()),
            ErrorClass::Unavailable | ErrorClass::Internal => Failure::Infra(e.to_string()),
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Engine(e) => e.into(),
            ServiceError::Index(e) => e.into(),
            ServiceError::Bind { .. } | ServiceError::Serve(_) => Failure::Infra(e.to_string()),
            other => Failure::User(other.to_string()),
        }
    }
}
