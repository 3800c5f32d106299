use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate token {token:?}")]
    DuplicateToken { token: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("zero-norm vector{}", .token.as_ref().map(|t| format!(" for token {t:?}")).unwrap_or_default())]
    ZeroVector { token: Option<String> },

    #[error("empty vocabulary: {0}")]
    EmptyVocabulary(String),

    #[error("unknown token {0:?}")]
    UnknownToken(String),

    #[error("no shared anchors between target and source vocabularies")]
    NoSharedAnchors,

    #[error("corpus yields no training pairs")]
    NoTrainingPairs,

    #[error("degenerate anchors: cross-covariance has rank 0")]
    DegenerateAnchors,

    #[error("singular Gram matrix for {neighbors} neighbors; use gram_epsilon > 0")]
    SingularGram { neighbors: usize },

    #[error("token {token:?}: {source}")]
    AtToken {
        token: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("special tokens missing from new vocabulary: {}", .0.join(", "))]
    MissingSpecials(Vec<String>),

    #[error("invalid token {token:?}: {reason}")]
    InvalidToken { token: String, reason: &'static str },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }

    pub(crate) fn at_token(self, token: &str) -> Self {
        Error::AtToken {
            token: token.to_owned(),
            source: Box::new(self),
        }
    }

    /// True when the root cause is an I/O failure rather than bad data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::AtToken { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
