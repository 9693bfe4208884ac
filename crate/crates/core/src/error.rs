//! Error type shared across the crate.

use std::fmt;
use std::io;

/// All failure modes surfaced by the library.
#[derive(Debug)]
pub enum Error {
    /// Tensor / matrix shapes do not line up.
    Dimension(String),
    /// Out-of-range index (class labels, sentence indices).
    Index(String),
    /// Invalid configuration value.
    Config(String),
    /// Optimizer stepped past the end of its learning-rate schedule.
    Schedule(String),
    /// Non-finite value where a finite one is required.
    Numeric(String),
    /// A keyed lookup (example id, checkpoint tensor name) found nothing.
    Lookup(String),
    /// Data failed schema or invariant validation.
    Validation(String),
    /// A line of an input file could not be parsed.
    Parse { line: usize, message: String },
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Index(msg) => write!(f, "index error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Schedule(msg) => write!(f, "schedule error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Lookup(msg) => write!(f, "lookup error: {msg}"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        Error::Io(err)
    }
}

impl Error {
    /// True for errors that should map to an I/O exit code rather than a
    /// validation exit code in the CLI.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
