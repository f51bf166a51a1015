use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed text input (scene file, config file, CSV).
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Well-formed input that violates a domain invariant.
    #[error("{element}: {reason}")]
    Validation { element: String, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Binary file that is not what it claims to be.
    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported {kind} file version {found} (this build reads version {supported})")]
    UnsupportedVersion {
        kind: &'static str,
        found: u32,
        supported: u32,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("no receiver position has a detection above threshold")]
    EmptyDataset,

    #[error("training diverged at epoch {epoch}: mean loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(element: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            element: element.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
