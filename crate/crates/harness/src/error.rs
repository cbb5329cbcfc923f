use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("unknown algorithm {0:?} (expected kl-acmes, cmaes, fixed-n-acmes or bfgs)")]
    UnknownAlgorithm(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed record: {message}")]
    Record { path: PathBuf, message: String },
    #[error("evaluation count mismatch: {0}")]
    Audit(String),
    #[error(transparent)]
    Core(#[from] klcma::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
