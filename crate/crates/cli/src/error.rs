use std::path::PathBuf;

use fairsumm_core::Error as CoreError;
use fairsumm_harness::HarnessError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input data: unparsable lines, schema or validation failures.
    #[error("{0}")]
    Invalid(String),
    /// Bad flags or configuration.
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_VALIDATION,
            CliError::Config(_) | CliError::Io { .. } => EXIT_IO,
            CliError::Core(e) => core_exit_code(e),
            CliError::Harness(HarnessError::Core(e)) => core_exit_code(e),
            CliError::Harness(HarnessError::Manifest { .. }) => EXIT_VALIDATION,
            CliError::Harness(_) => EXIT_IO,
        }
    }
}

fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Parse { .. }
        | CoreError::Schema { .. }
        | CoreError::Validation { .. }
        | CoreError::Alignment { .. }
        | CoreError::EmptyDataset
        | CoreError::ZeroMass(_)
        | CoreError::EmptySummary { .. }
        | CoreError::InvalidWeight { .. }
        | CoreError::NotNormalized { .. }
        | CoreError::DimensionMismatch { .. }
        | CoreError::MissingScore { .. }
        | CoreError::InvalidScore { .. }
        | CoreError::LengthLimit { .. } => EXIT_VALIDATION,
        _ => EXIT_IO,
    }
}
