use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Document(#[from] DocumentError),

    #[error("missing required field: {0}")]
    MissingField(&'static str),

    #[error("unnameable entity: {0:?}")]
    UnnameableEntity(String),

    #[error("entity not found: {0}")]
    EntityNotFound(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient calibration data: need at least {needed} rows, got {got}")]
    InsufficientCalibration { needed: usize, got: usize },

    #[error("rank deficient; increase lambda")]
    RankDeficient,

    #[error("feature schema mismatch: model expects {expected}, got {actual}")]
    SchemaMismatch { expected: String, actual: String },

    #[error("no test data")]
    NoTestData,

    #[error("corrupt store: {0}")]
    CorruptStore(String),

    #[error("invalid model bundle: {0}")]
    InvalidBundle(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True when the failure stems from caller input rather than a fault in
    /// the library or the environment.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::CorruptStore(_))
    }
}

/// Failure to turn one raw chunk into a `PatentDocument`. Always carries the
/// chunk location so the record can be quarantined.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{source_file}@{byte_offset}: {kind}")]
pub struct DocumentError {
    pub source_file: String,
    pub byte_offset: u64,
    pub kind: DocumentErrorKind,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DocumentErrorKind {
    #[error("unsupported document type: {0}")]
    UnsupportedType(String),
    #[error("missing required field: {0}")]
    MissingField(&'static str),
    #[error("invalid date: {0:?}")]
    InvalidDate(String),
    #[error("invalid date ordering: grant {grant} precedes filing {filing}")]
    InvalidDateOrdering { filing: String, grant: String },
    #[error("duplicate claim number {0}")]
    DuplicateClaim(u32),
    #[error("malformed xml: {0}")]
    Malformed(String),
    #[error("truncated document")]
    Truncated,
}
