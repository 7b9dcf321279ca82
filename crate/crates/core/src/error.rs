use thiserror::Error;

/// Errors raised by the lab's computations and file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// An exact enumeration would exceed its configured budget.
    #[error("budget exceeded in {what}: needs {needed} candidates, budget is {budget} (use heuristic mode or raise the budget)")]
    Budget {
        what: String,
        needed: String,
        budget: u64,
    },

    /// A JSON or CSV document does not match the expected schema.
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    /// Integer flow units overflowed while scaling rational weights.
    #[error("overflow: {0}")]
    Overflow(String),

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

    pub(crate) fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub(crate) fn budget(what: impl Into<String>, needed: impl ToString, budget: u64) -> Self {
        Error::Budget {
            what: what.into(),
            needed: needed.to_string(),
            budget,
        }
    }

    /// True for budget failures, which the CLI maps to their own exit code.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
