use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::TurnId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("schema violation in dialogue {dialogue_id} turn {turn_index}: {message}")]
    SchemaViolation {
        dialogue_id: String,
        turn_index: usize,
        message: String,
    },

    #[error("alternation violation in dialogue {dialogue_id} turn {turn_index}: {message}")]
    Alternation {
        dialogue_id: String,
        turn_index: usize,
        message: String,
    },

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("example database is empty")]
    EmptyDatabase,

    #[error("no embedding vector for turn {0}")]
    MissingEmbedding(TurnId),

    #[error("embedding dimension mismatch for turn {id}: expected {expected}, got {actual}")]
    EmbeddingDimension {
        id: TurnId,
        expected: usize,
        actual: usize,
    },

    #[error("unknown retriever {0:?}")]
    UnknownRetriever(String),

    #[error("anchor {anchor} has {available} candidates, at least {required} are needed")]
    TooFewCandidates {
        anchor: TurnId,
        available: usize,
        required: usize,
    },

    #[error("prompt error: {0}")]
    Prompt(String),

    #[error("answer validation failed: {0}")]
    AnswerValidation(String),

    #[error("answerer failed: {0}")]
    Answerer(String),

    #[error("answerer timed out after {0:?}")]
    AnswererTimeout(std::time::Duration),

    #[error("config error: {0}")]
    Config(String),

    #[error("metric error: {0}")]
    Metric(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 2,
            Error::Answerer(_) | Error::AnswererTimeout(_) => 3,
            Error::AnswerValidation(_)
            | Error::Parse { .. }
            | Error::InvalidSchema(_)
            | Error::SchemaViolation { .. }
            | Error::Alternation { .. }
            | Error::Corpus(_) => 4,
            _ => 1,
        }
    }
}
