use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("digit {digit} at position {position} is out of range for radix {radix}")]
    Encoding {
        digit: u8,
        position: usize,
        radix: u8,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("mixer {mixer} unsupported for radices {radices:?}")]
    UnsupportedMixer {
        mixer: &'static str,
        radices: Vec<usize>,
    },

    #[error("expected {expected} angles, got {actual}")]
    Arity { expected: usize, actual: usize },

    #[error("configuration space of {required} entries exceeds the memory cap of {cap_bytes} bytes")]
    MemoryCap { required: u128, cap_bytes: u64 },

    #[error("objective became non-finite at iteration {iteration}: {value}")]
    NonFinite { iteration: usize, value: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed cost vector dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(path: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
