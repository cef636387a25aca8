use thiserror::Error;

/// Failure modes shared by every layer of the lab.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: argument {arg} exceeds cap {cap}")]
    Range { arg: f64, cap: f64 },
    #[error("capability error: {0}")]
    Capability(String),
    #[error("numeric error: {msg} (achieved tolerance {achieved:e})")]
    Numeric { msg: String, achieved: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
    #[error("spectral error: {0}")]
    Spectral(String),
    #[error("solvability error: {msg} (pairing {pairing:e})")]
    Solvability { msg: String, pairing: f64 },
    #[error("ambiguous classification: {0}")]
    Ambiguity(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
