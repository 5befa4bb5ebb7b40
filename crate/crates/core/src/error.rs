//! Error type shared by all pipeline stages.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty buffer")]
    EmptyBuffer,

    #[error("inconsistent DF table: token {0:?} not present")]
    InconsistentDfTable(String),

    #[error("unknown class frequency for class {0}")]
    UnknownClassFrequency(u32),

    #[error("degenerate weights: no strictly positive entry")]
    DegenerateWeights,

    #[error("sample size too large: requested {requested}, only {available} available")]
    SampleSizeTooLarge { requested: usize, available: usize },

    #[error("fewer than 2 samples: cannot build pairs from {0} sample(s)")]
    TooFewSamples(usize),

    #[error("label out of range: {label} >= {n_labels}")]
    LabelOutOfRange { label: u32, n_labels: usize },

    #[error("no classes seen")]
    NoClassesSeen,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input")]
    NonFiniteInput,

    #[error("divergence: non-finite loss at step {step}")]
    Divergence { step: usize },

    #[error("embedding not found for id {0:?}")]
    EmbeddingNotFound(String),

    #[error("duplicate embedding id {0:?}")]
    DuplicateEmbeddingId(String),

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("format error in {path}, line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
