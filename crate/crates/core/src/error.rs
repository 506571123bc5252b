use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Calibration design is singular: the burn-in sample did not move enough.
    #[error("rank-deficient calibration design (rank {rank} < {required})")]
    RankDeficient { rank: usize, required: usize },

    /// Cholesky breakdown or a non-positive-definite `W + λI`.
    #[error("preconditioner is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A non-finite value appeared where a finite one is required.
    #[error("numeric guard tripped: {0}")]
    NonFinite(String),

    /// Enumeration would exceed the state budget.
    #[error("enumeration of {states} states exceeds budget {budget}")]
    EnumerationTooLarge { states: f64, budget: f64 },

    #[error("state {0} is not in the support of the reference distribution")]
    InvalidState(String),

    /// Between-chain variance is zero, so the batch-mean ESS is undefined.
    #[error("effective sample size undefined: between-chain variance is zero")]
    EssUndefined,

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    /// Kernel used outside its contract, e.g. Gibbs with a non-matching quadratic target.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("empty grid: {0}")]
    EmptyGrid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
