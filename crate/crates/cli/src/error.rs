use std::path::PathBuf;

use blocksig_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: row {row}, column {col}: {msg}")]
    Parse { path: PathBuf, row: usize, col: usize, msg: String },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit status: 2 parse, 3 configuration, 4 numerical, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Format { .. } => 2,
            CliError::Config(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::DegenerateSpectrum(_) | CoreError::UndefinedLoss(_) => {
                CliError::Numeric(e.to_string())
            }
            CoreError::InvalidInput(_)
            | CoreError::Config(_)
            | CoreError::NoFeaturesSelected
            | CoreError::InfeasiblePlacement { .. } => CliError::Config(e.to_string()),
        }
    }
}
