use thiserror::Error;

use crate::signal::MixtureFit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed component sequence: unexpected {found:?} at position {position}")]
    MalformedSequence { found: char, position: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mixture fit did not converge after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        last: Box<MixtureFit>,
    },

    #[error("degenerate mixture fit: {0}")]
    DegenerateFit(String),

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("no split possible: {0}")]
    NoSplit(String),

    #[error("calibration is unidentifiable: dependent columns {columns:?}")]
    Unidentifiable { columns: Vec<&'static str> },

    #[error("data error: {0}")]
    Data(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
