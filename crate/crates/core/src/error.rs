use std::path::PathBuf;

/// Crate-wide error type. Variants carry enough context (ids, paths, line
/// numbers) for a caller to report the failure without re-deriving it.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),

    #[error("duplicate passage_id {0:?}")]
    DuplicatePassageId(String),

    #[error("unknown doc_id {0:?}")]
    UnknownDocId(String),

    #[error("no embedding for key {0:?}")]
    UnknownEmbeddingKey(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {reason}")]
    FileFormat { path: PathBuf, reason: String },

    #[error("ANN state not built; call build_ann first")]
    AnnNotBuilt,

    #[error("relevance model is degenerate: {0}")]
    DegenerateModel(String),

    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid_param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn file_format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::FileFormat {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
