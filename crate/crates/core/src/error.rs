use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Malformed arguments: non-finite values, indices out of range,
    /// mismatched lengths.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Parameters that are individually valid but cannot be used together.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("no features selected by the screen")]
    NoFeaturesSelected,

    #[error("block placement infeasible: placed {placed} of {requested} blocks")]
    InfeasiblePlacement { placed: usize, requested: usize },

    #[error("loss undefined: {0}")]
    UndefinedLoss(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
