use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The minimum of a sampled curve sits on the edge of the search interval.
    #[error("minimum at bracket boundary a = {boundary} (bracket [{lo}, {hi}])")]
    Bracket { lo: f64, hi: f64, boundary: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("empty sample batch")]
    EmptyBatch,

    /// All observations coincide, so a scale estimate is zero.
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A prior-probe radius caught no draws.
    #[error("no prior draws within radius {radius}; increase m or the radii")]
    EmptyCell { radius: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
