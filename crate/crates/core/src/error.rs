use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A mesh, matrix or field failed an invariant check.
    #[error("validation failed{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Validation { line: Option<usize>, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{method} did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{method} breakdown at iteration {iteration}: {reason}")]
    Breakdown {
        method: &'static str,
        iteration: usize,
        reason: &'static str,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("dense eigensolver limited to dimension {cap}, got {n}")]
    DimensionCap { n: usize, cap: usize },

    #[error("coefficient bound violated: {0}")]
    CoefficientBound(String),

    #[error("velocity must vanish on the boundary: |v| = {magnitude:.3e} at vertex {vertex}")]
    BoundaryVelocity { vertex: usize, magnitude: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("no sign change of the root function on [{lo}, {hi}]")]
    Bracketing { lo: f64, hi: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse failure class, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Solver,
    Validation,
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) | Error::Io { .. } => ErrorKind::Config,
            Error::Parse { .. }
            | Error::Validation { .. }
            | Error::CoefficientBound(_)
            | Error::BoundaryVelocity { .. } => ErrorKind::Validation,
            Error::DimensionMismatch { .. }
            | Error::NotConverged { .. }
            | Error::Breakdown { .. }
            | Error::NotPositiveDefinite(_)
            | Error::DimensionCap { .. }
            | Error::NonFinite(_)
            | Error::Bracketing { .. } => ErrorKind::Solver,
            Error::Context { source, .. } => source.kind(),
        }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation {
            line: None,
            message: message.into(),
        }
    }
}

/// Attach context to the error side of a `Result`.
pub trait ResultExt<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.context(context()))
    }
}
