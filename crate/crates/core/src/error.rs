use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure while reading a single LIBSVM line.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("missing label")]
    MissingLabel,
    #[error("malformed token `{0}`")]
    MalformedToken(String),
    #[error("feature index 0 is reserved (indices are 1-based)")]
    ZeroIndex,
    #[error("non-finite value in token `{0}`")]
    NonFinite(String),
    #[error("feature index {index} does not follow {previous} (indices must be strictly increasing)")]
    NonIncreasingIndex { previous: u32, index: u32 },
}

impl ParseError {
    /// Format errors signal structurally corrupt input rather than an unreadable token.
    pub fn is_format_error(&self) -> bool {
        matches!(
            self,
            ParseError::NonIncreasingIndex { .. } | ParseError::ZeroIndex
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: ParseError,
    },

    #[error("{}: {source}", describe_location(.path, .line))]
    Io {
        path: Option<PathBuf>,
        line: Option<usize>,
        #[source]
        source: io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("task mismatch: {0}")]
    TaskMismatch(String),

    #[error("numeric error at slot {slot}: {detail}")]
    Numeric { slot: usize, detail: String },

    #[error("round {round}: {source}")]
    Round {
        round: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("batch oracle did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("bad file format: {0}")]
    Format(String),
}

fn describe_location(path: &Option<PathBuf>, line: &Option<usize>) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!("{}:{l}", p.display()),
        (Some(p), None) => p.display().to_string(),
        (None, Some(l)) => format!("line {l}"),
        (None, None) => "I/O error".to_string(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: Some(path.into()),
            line: None,
            source,
        }
    }

    pub(crate) fn at_round(self, round: u64) -> Self {
        match self {
            e @ Error::Round { .. } => e,
            e => Error::Round {
                round,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, looking through round wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Round { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<io::Error> for Error {
    fn from(source: io::Error) -> Self {
        Error::Io {
            path: None,
            line: None,
            source,
        }
    }
}
