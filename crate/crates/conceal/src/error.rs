use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ConcealError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image format: {0}")]
    Format(String),
    #[error("loss pattern: {0}")]
    Pattern(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("block {index} at ({row}, {col}): {source}")]
    Block {
        index: usize,
        row: usize,
        col: usize,
        #[source]
        source: fse_core::Error,
    },
    #[error(transparent)]
    Core(#[from] fse_core::Error),
}

impl ConcealError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ConcealError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, ConcealError>;
