use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config keys or input files.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Numeric(#[from] bregman_dre::Error),

    /// The identity suite ran and at least one group failed.
    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Io { .. } => 1,
            // parameter and data-shape errors surfaced by the core are still usage errors
            Self::Numeric(
                bregman_dre::Error::UnknownFamily(_)
                | bregman_dre::Error::InvalidParameter { .. }
                | bregman_dre::Error::InvalidPair(_)
                | bregman_dre::Error::DimensionMismatch { .. },
            ) => 1,
            Self::Numeric(_) => 2,
            Self::CheckFailed(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Usage(format!("csv: {e}"))
    }
}
