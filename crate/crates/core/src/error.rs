use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The CLI maps these onto exit codes: validation-type failures exit with 2,
/// budget refusals with 3 and internal errors with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degree {degree} forms are rank deficient: rank {rank} < {expected}")]
    RankDeficient {
        degree: usize,
        rank: usize,
        expected: usize,
    },

    #[error("budget exceeded: {what} needs about {required:.3e} operations, budget is {budget:.3e}")]
    Budget {
        what: String,
        required: f64,
        budget: f64,
    },

    #[error("local factor at p = {primes:?} did not stabilize")]
    NotStabilized { primes: Vec<u64> },

    #[error("arithmetic overflow while {0}")]
    Overflow(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn budget(what: impl Into<String>, required: f64, budget: f64) -> Self {
        Error::Budget {
            what: what.into(),
            required,
            budget,
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::Validation(_)
            | Error::Dimension { .. }
            | Error::RankDeficient { .. }
            | Error::Io(_) => 2,
            Error::Budget { .. } => 3,
            Error::NotStabilized { .. } | Error::Overflow(_) | Error::Internal(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
