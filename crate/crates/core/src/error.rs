use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: {needed:.3e} configurations exceed the enumeration budget of {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: f64,
        budget: u64,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("this check requires non-negative couplings")]
    NotFerromagnetic,

    #[error("bubble series diverges at p = {p}: spectral radius {radius:.6}")]
    Diverged { p: f64, radius: f64 },

    #[error("diagram series still above tolerance after {cap} terms (last term {last:.3e})")]
    SeriesTruncation { cap: usize, last: f64 },

    #[error("malformed graph catalog: {0}")]
    Catalog(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
