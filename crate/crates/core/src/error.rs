//! Error type shared across the toolkit.
//!
//! Variants map onto the CLI exit codes: configuration, I/O, and file-format
//! problems exit 2, shape mismatches exit 3, numerical failures and
//! infeasible scenes exit 4.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Invalid configuration or precondition violation (exit 2).
    Config(String),
    /// File system failure (exit 2).
    Io(std::io::Error),
    /// Malformed artifact file: bad magic, truncated payload, version skew (exit 2).
    Format(String),
    /// Dimension mismatch between artifacts; both shapes are reported (exit 3).
    ShapeMismatch {
        context: String,
        expected: String,
        found: String,
    },
    /// Scene cannot carry current: no conducting path between the electrodes (exit 4).
    InfeasibleScene(String),
    /// Numerical failure: solver residual, singular evaluation, divergence (exit 4).
    Numerical(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
            Error::Format(msg) => write!(f, "file format error: {msg}"),
            Error::ShapeMismatch {
                context,
                expected,
                found,
            } => write!(f, "shape mismatch in {context}: expected {expected}, found {found}"),
            Error::InfeasibleScene(msg) => write!(f, "infeasible scene: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
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

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

impl Error {
    /// Process exit code for the CLI layer.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) | Error::Format(_) => 2,
            Error::ShapeMismatch { .. } => 3,
            Error::InfeasibleScene(_) | Error::Numerical(_) => 4,
        }
    }
}
