use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SqstError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SqstError {
    #[error("{0} is not prime")]
    NotPrime(u32),
    #[error("field order {p}^{n} exceeds the configured maximum {max}")]
    FieldTooLarge { p: u32, n: u32, max: usize },
    #[error("dimension {0} is not a prime power; no complete MUB construction is available")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),
    #[error("POVM mode mismatch: expected {expected}, got {actual}")]
    ModeMismatch { expected: String, actual: String },
    #[error("MUB fingerprint mismatch: record has {record:016x}, family has {family:016x}")]
    FingerprintMismatch { record: u64, family: u64 },
    #[error("corrupt record header: {0}")]
    CorruptHeader(String),
    #[error("truncated record body: expected {expected} outcomes, found {found}")]
    TruncatedBody { expected: u64, found: u64 },
    #[error("clipped spectrum has no positive mass")]
    NoPositiveMass,
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SqstError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SqstError::Io {
            path: path.into(),
            source,
        }
    }
}
