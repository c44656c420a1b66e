use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "unsupported key size {bits} bits; allowed sizes are 512 (test only), 1024, 2048 and 3072"
    )]
    UnsupportedKeySize { bits: u32 },

    #[error("key mismatch: operand was produced under key {found}, expected {expected}")]
    KeyMismatch { expected: String, found: String },

    #[error("plaintext {value} is outside the signed range (-n/2, n/2) of this modulus")]
    PlaintextOutOfRange { value: String },

    #[error("ciphertext residue is not invertible modulo n^2; re-encrypt with fresh randomness")]
    NonInvertibleCiphertext,

    #[error("coordinate {value} exceeds the configured bound {max_abs}")]
    CoordinateOutOfRange { value: f64, max_abs: f64 },

    #[error("overflow budget exceeded: dimension {dim} is above the maximum safe dimension {max_dim} for this modulus and scale")]
    BudgetExceeded { dim: usize, max_dim: usize },

    #[error("invalid block schema: {0}")]
    InvalidSchema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unknown block label {label:?}")]
    UnknownBlock { label: String },

    #[error("weight count {got} does not match block count {expected}")]
    WeightCount { expected: usize, got: usize },

    #[error("line {line}: {msg}")]
    Ingest { line: usize, msg: String },

    #[error("database is empty")]
    EmptyDatabase,

    #[error("no decryption key available for the requested operation")]
    MissingKey,

    #[error("database integrity check failed: {0}")]
    Manifest(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
