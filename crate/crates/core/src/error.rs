use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::AugKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which half of a two-stage LLM job failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Summarize,
    Generate,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Summarize => f.write_str("summarize"),
            Stage::Generate => f.write_str("generate"),
        }
    }
}

/// Failure talking to a completion endpoint.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited by endpoint")]
    RateLimited,
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed endpoint response: {0}")]
    Protocol(String),
    #[error("completion was empty after trimming")]
    EmptyCompletion,
}

impl LlmError {
    /// Transport hiccups and rate limits are worth another attempt; nothing else is.
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Transport(_) | LlmError::RateLimited)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("duplicate id {id:?} on lines {first} and {second}")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },

    #[error("id {0:?} appears in both train and test splits")]
    SplitCollision(String),

    #[error("line {line}: field {field:?} is empty")]
    EmptyField { line: usize, field: &'static str },

    #[error("no records")]
    NoRecords,

    #[error("cache storage failure: {0}")]
    Storage(#[source] std::io::Error),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Llm {
        stage: Stage,
        #[source]
        source: LlmError,
    },

    #[error("missing {kind} augmentations for {} item(s): {}", ids.len(), ids.join(", "))]
    MissingAugmentation { kind: AugKind, ids: Vec<String> },

    #[error(
        "need {needed} {kind} generations per item; {} item(s) fall short: {}",
        short.len(),
        short.iter().map(|(id, have)| format!("{id} (has {have})")).collect::<Vec<_>>().join(", ")
    )]
    GenerationShortfall {
        kind: AugKind,
        needed: usize,
        short: Vec<(String, usize)>,
    },

    #[error("embedding service error: {0}")]
    Embedding(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("snippet too large: {nodes} syntax nodes exceeds the limit of {limit}")]
    SnippetTooLarge { nodes: usize, limit: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("bad index file: {0}")]
    IndexFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
