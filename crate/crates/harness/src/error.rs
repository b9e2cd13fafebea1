use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: stotiht::Error,
    },
    #[error(transparent)]
    Core(#[from] stotiht::Error),
}

impl HarnessError {
    /// Process exit code: 2 for bad arguments, 3 for file and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Invalid(_) => 2,
            HarnessError::File { .. } => 3,
            HarnessError::Core(stotiht::Error::InvalidArgument(_)) => 2,
            HarnessError::Core(_) => 3,
        }
    }

    pub fn file(path: impl Into<PathBuf>, source: impl Into<stotiht::Error>) -> Self {
        HarnessError::File {
            path: path.into(),
            source: source.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarnessError::Invalid(msg.into()))
}
