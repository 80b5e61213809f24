use thiserror::Error;

use crate::training::AgbState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("batch normalization needs at least 2 values per channel in train mode, got {0}")]
    DegenerateBatch(usize),

    #[error("backward root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("no gradient entry for parameter `{0}`")]
    MissingGradient(String),

    #[error("empty input to {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("non-finite loss at epoch {epoch}, step {step}: {state:?}")]
    NonFinite { epoch: usize, step: u64, state: AgbState },

    #[error("model produced non-finite pixels")]
    NonFiniteOutput,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// Process exit status for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::NonFinite { .. } | Error::NonFiniteOutput => 4,
            _ => 3,
        }
    }
}
