use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used for process exit codes and FFI error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("embedding row {row} out of range (store holds {count} rows)")]
    DanglingRow { row: usize, count: usize },

    #[error("embedding store: {0}")]
    CorruptStore(String),

    #[error("checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint variant mismatch: file holds {found}, expected {expected}")]
    VariantMismatch { expected: String, found: String },

    #[error("cluster {0} has no sentences left")]
    EmptyCluster(String),

    #[error("document {document} of cluster {cluster} is empty")]
    EmptyDocument { cluster: String, document: usize },

    #[error("reference summary is empty")]
    EmptyReference,

    #[error("cluster {0} has no reference summary")]
    MissingReference(String),

    #[error("empty candidate pool")]
    EmptyPool,

    #[error("no sentence fits within the budget of {0} words")]
    NothingFits(usize),

    #[error("zero-norm vector: {0}")]
    ZeroNorm(&'static str),

    #[error("non-finite value at stage {0}")]
    NonFinite(String),

    #[error("unknown document id {0:?}")]
    UnknownDocument(String),

    #[error("ids do not match: {0}")]
    IdMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) | Error::VariantMismatch { .. } => ErrorKind::Validation,
            Error::ZeroNorm(_) | Error::NonFinite(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
