use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("target ({x:.6}, {y:.6}) is outside the reachable annulus [{inner:.6}, {outer:.6}]")]
    Unreachable { x: f64, y: f64, inner: f64, outer: f64 },

    #[error("singular configuration: |det J| = {det:.3e} is below {threshold:.1e}")]
    SingularConfiguration { det: f64, threshold: f64 },

    #[error("{what} is singular at t = {t}")]
    SingularMatrix { what: &'static str, t: f64 },

    #[error("t = {t} lies outside the schedule domain [{start}, {end}]")]
    OutOfHorizon { t: f64, start: f64, end: f64 },

    #[error("non-finite value in {context} at t = {t}")]
    NonFinite { context: &'static str, t: f64 },

    #[error("KKT system of the transcription oracle is singular")]
    SingularKkt,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("reference unreachable at t = {t}: {source}")]
    ReferenceUnreachable {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping phase labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Phase { source, .. } | Error::ReferenceUnreachable { source, .. } => {
                source.root()
            }
            other => other,
        }
    }

    /// Coarse classification used for process exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self.root() {
            Error::Config { .. } | Error::InvalidArgument(_) => ErrorCategory::Config,
            Error::Io { .. } | Error::Csv { .. } => ErrorCategory::Io,
            _ => ErrorCategory::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Numerical,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 3,
            ErrorCategory::Numerical => 4,
            ErrorCategory::Io => 5,
        }
    }
}
