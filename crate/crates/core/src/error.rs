use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A distribution would have no mass: nothing could be attributed.
    #[error("zero mass: {0}")]
    ZeroMass(String),

    #[error("summary from system {system:?} has no tokens")]
    EmptySummary { system: String },

    #[error("invalid weight {value} at index {index}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("distribution weights sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("dimension mismatch: expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite score {value} at index {index}")]
    InvalidScore { index: usize, value: f64 },

    #[error("softmax temperature {0} is below the supported minimum")]
    InvalidTemperature(f64),

    #[error("scorer failure{}: {message}", value_index.map(|i| format!(" (value {i})")).unwrap_or_default())]
    Scorer {
        value_index: Option<usize>,
        message: String,
    },

    #[error("input exceeds the scorer length limit{}: {message}", value_index.map(|i| format!(" (value {i})")).unwrap_or_default())]
    LengthLimit {
        value_index: Option<usize>,
        message: String,
    },

    #[error("no stored scores for sample {sample_id:?}, system {system:?}")]
    MissingScore { sample_id: String, system: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("sample {sample_id:?} failed validation: {}", issues.join("; "))]
    Validation {
        sample_id: String,
        line: Option<usize>,
        issues: Vec<String>,
    },

    #[error("{segments} segments but {labels} labels")]
    Alignment { segments: usize, labels: usize },

    #[error("pool for {value:?} has {available} units, {needed} required")]
    PoolExhausted {
        value: String,
        needed: usize,
        available: usize,
    },

    #[error("cannot aggregate an empty dataset")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
