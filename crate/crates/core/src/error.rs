use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch at {location}: expected {expected}, got {got}")]
    Dimension {
        location: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid state: {0}")]
    State(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate score statistics: {0}")]
    DegenerateStats(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("rejection sampling starved: {0}")]
    Starvation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(location: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Dimension {
            location: location.into(),
            expected,
            got,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
