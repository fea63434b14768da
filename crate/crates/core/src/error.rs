use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for process exit codes and C status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Data,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid opinion: {0}")]
    InvalidOpinion(String),

    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),

    #[error("dogmatic opinion (u = 0) has no finite evidence representation")]
    DogmaticOpinion,

    #[error("cumulative fusion requires 0 < u < 1 for both operands (got {left} and {right})")]
    FusionDomain { left: f64, right: f64 },

    #[error("cardinality mismatch: expected {expected}, found {found}")]
    Cardinality { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("state id {id} out of range 1..={num_states} (window {window}, offset {offset})")]
    Observation {
        id: u32,
        num_states: usize,
        window: usize,
        offset: usize,
    },

    #[error("line {line}: {message}")]
    Trace { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("scenario file: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Parameter(_) => ErrorClass::Config,
            Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn trace(line: u64, message: impl Into<String>) -> Self {
        Error::Trace {
            line,
            message: message.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            kind => Error::trace(line, format!("{kind:?}")),
        }
    }
}
