use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// The warden can separate the hypotheses perfectly (zero DEP).
    #[error(
        "degenerate detection: source power at the warden ({signal:e} W) is not below \
         the maximum jamming power at the warden ({jamming:e} W)"
    )]
    DegenerateDetection { signal: f64, jamming: f64 },

    #[error("leg {index} has length {length:e} m, below the minimum {min:e} m")]
    DegenerateLeg { index: usize, length: f64, min: f64 },

    #[error("bisection bracket has no sign change: {0}")]
    Bracket(String),

    #[error("infeasible phase-switching interval: beta1 + beta2 = {0} >= 1")]
    InfeasibleInterval(f64),

    #[error("infeasible start: {0}")]
    InfeasibleStart(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
