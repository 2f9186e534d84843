use thiserror::Error;

/// Errors raised by the library. Each variant maps to one failure class so
/// batch tooling can report them as machine-readable records.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("rejected input: {0}")]
    RejectedInput(String),
    #[error("no co-valid pixels between ground truth and prediction")]
    EmptyOverlap,
    #[error("degenerate prediction: median of kept prediction is zero")]
    DegeneratePrediction,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable snake_case identifier for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::RejectedInput(_) => "rejected_input",
            Error::EmptyOverlap => "empty_overlap",
            Error::DegeneratePrediction => "degenerate_prediction",
            Error::EmptyCorpus => "empty_corpus",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::Domain(_) => "domain",
            Error::InvalidConfig(_) => "invalid_config",
            Error::UnknownLabel(_) => "unknown_label",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
