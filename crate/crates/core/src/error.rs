use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("enumeration budget exceeded: C({d}, {k}) = {count} supports, budget is {budget}")]
    BudgetExceeded {
        d: usize,
        k: usize,
        count: u128,
        budget: u64,
    },

    #[error("delta = {0} is outside the admissible range [0, 2/3)")]
    OutOfDomain(f64),

    /// A lower-bound certificate below 2/3 can neither confirm nor refute the hypothesis.
    #[error("indeterminate: lower-bound certificate with delta = {0} < 2/3 cannot certify the hypothesis")]
    Indeterminate(f64),

    #[error("decomposition exceeded the atom budget of {0}")]
    AtomBudget(usize),

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
