use thiserror::Error;

/// Errors produced by the learners, solvers, oracles and data readers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a mathematical operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An invalid learner, schedule or generator configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input text. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally valid data that violates a precondition (e.g. a zero vector).
    #[error("data error: {0}")]
    Data(String),

    /// A non-finite quantity appeared while stepping a learner.
    #[error("numeric error at round {round}: {message}")]
    Numeric { round: u64, message: String },

    /// An iterative reference solver hit its iteration cap.
    #[error("no convergence after {iterations} iterations (final displacement {displacement:e})")]
    Convergence { iterations: usize, displacement: f64 },

    /// A metric was requested on input it is undefined for.
    #[error("metric error: {0}")]
    Metric(String),

    /// Two inputs that must line up did not.
    #[error("input error: {0}")]
    Input(String),

    /// Bisection bracket without a sign change.
    #[error("internal solver error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
