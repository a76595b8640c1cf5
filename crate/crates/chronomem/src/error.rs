//! Engine-wide error types.

use thiserror::Error;

/// Errors surfaced by model invocations (mock, HTTP, or scripted).
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model invocation timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("model transport error: {0}")]
    Transport(String),
    #[error("model returned a malformed payload: {0}")]
    Malformed(String),
}

/// Unified error type for every fallible engine operation.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("invalid chunk sizes: parent_size={parent_size}, child_size={child_size}, overlap={overlap}")]
    InvalidChunkSizes {
        parent_size: usize,
        child_size: usize,
        overlap: usize,
    },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("query already carries a role prefix; refusing to augment twice: {0:?}")]
    AlreadyAugmented(String),
    #[error("duplicate id {0:?} in ranked list {1}")]
    DuplicateInRankedList(String, usize),
    #[error("fusion requires at least one ranked list")]
    NoRankedLists,
    #[error("chunk is not indexed: {0}")]
    NotIndexed(String),
    #[error("session not found: {0}")]
    SessionNotFound(String),
    #[error("session already exists: {0}")]
    SessionExists(String),
    #[error("corrupt log line {line} in {path}: {reason}")]
    CorruptLog {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("round must increase by exactly 1 (last {last}, got {got})")]
    NonMonotonicRound { last: u32, got: u32 },
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error("replay prefix {prefix} exceeds {available} logged turns")]
    PrefixOutOfRange { prefix: usize, available: usize },
    #[error("simulated crash after step: {0}")]
    SimulatedCrash(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl EngineError {
    /// Attaches a path to an io::Error, which on its own never names the file.
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        EngineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
