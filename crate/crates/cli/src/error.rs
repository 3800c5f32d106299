use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    /// A pipeline stage failed; `stage` is e.g. `encoder/train-cbow`.
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: vocadapt_core::Error,
    },

    #[error(transparent)]
    Core(#[from] vocadapt_core::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("invalid config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Stage { source, .. } | CliError::Core(source) => {
                if source.is_io() {
                    EXIT_IO
                } else {
                    EXIT_DATA
                }
            }
            CliError::Io { .. } => EXIT_IO,
            CliError::Config { .. } | CliError::Data(_) => EXIT_DATA,
        }
    }
}

/// Wraps a core error with the failing stage name.
pub(crate) fn stage(name: impl Into<String>) -> impl FnOnce(vocadapt_core::Error) -> CliError {
    let name = name.into();
    move |source| CliError::Stage { stage: name, source }
}
