use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] cellhealth_core::Error),

    #[error(transparent)]
    Nn(#[from] cellhealth_nn::Error),

    /// A stage was run before the artifacts it depends on exist.
    #[error("missing prerequisite {}: {hint}", path.display())]
    Ordering { path: PathBuf, hint: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A checkpoint that must stay frozen changed during training.
    #[error("frozen checkpoint {} changed during training ({before} -> {after})", path.display())]
    FrozenMutation {
        path: PathBuf,
        before: String,
        after: String,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
