use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input value lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// `step` and `observe` were called out of strict alternation.
    #[error("protocol order violation: {0}")]
    ProtocolOrder(String),

    /// A statistic was requested before any step was observed.
    #[error("no observations recorded yet")]
    Empty,

    #[error("stationary distribution did not converge after {iterations} iterations (residual {residual:e})")]
    FixedPoint { iterations: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("round {round}: {source}")]
    Round {
        round: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_round(self, round: u64) -> Self {
        match self {
            e @ Error::Round { .. } => e,
            e => Error::Round {
                round,
                source: Box::new(e),
            },
        }
    }
}

/// Validates a binary outcome.
pub(crate) fn check_outcome(y: u8) -> Result<()> {
    if y > 1 {
        return Err(Error::domain(format!("outcome must be 0 or 1, got {y}")));
    }
    Ok(())
}
