//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file content; carries a 1-based line number when known.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A structural invariant of the data is violated (non-monotone dates,
    /// interior gaps, duplicated vintages, first-release conflicts).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// A value is outside the mathematical domain of an operation,
    /// e.g. a non-positive value under a log transform.
    #[error("domain error: {0}")]
    Domain(String),

    /// A required observation is missing from a covering series.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// A variable has no vintage at the requested date.
    #[error("missing vintage for variable '{0}'")]
    MissingVariable(String),

    #[error("insufficient data: need {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// Singular or rank-deficient design matrix.
    #[error("rank error: {0}")]
    Rank(String),

    /// Numerical failure (non-convergence, underflow) inside a solver or sampler.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A statistic is undefined on the given input, e.g. a Diebold-Mariano
    /// test on an identically-zero loss differential or an empty sample.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Invalid configuration or incompatible arguments.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    /// Prefixes the message with a context tag (e.g. a variable id) while
    /// keeping the error kind.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            Error::Parse { line, msg } => Error::parse(line, format!("{ctx}: {msg}")),
            Error::Integrity(s) => Error::Integrity(format!("{ctx}: {s}")),
            Error::Domain(s) => Error::Domain(format!("{ctx}: {s}")),
            Error::Coverage(s) => Error::Coverage(format!("{ctx}: {s}")),
            Error::Rank(s) => Error::Rank(format!("{ctx}: {s}")),
            Error::Numerical(s) => Error::Numerical(format!("{ctx}: {s}")),
            Error::Degenerate(s) => Error::Degenerate(format!("{ctx}: {s}")),
            Error::Config(s) => Error::Config(format!("{ctx}: {s}")),
            other => other,
        }
    }

    /// Process exit code convention: 1 for configuration problems,
    /// 2 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}
