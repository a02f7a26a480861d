use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("numeric failure (non-finite state) at t = {t}")]
    NumericFailure { t: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("inconsistent structure: {0}")]
    Structure(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("arc has untagged jumps; slow-jump classification needs tags")]
    MissingTags,
    #[error("concurrent sampling: agents {agents:?} triggered together")]
    ConcurrentSampling { agents: Vec<usize> },
    #[error("singular linear system")]
    SingularSystem,
    #[error("index {index} out of range for {len} agents")]
    Index { index: usize, len: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
