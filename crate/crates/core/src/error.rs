use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration budget exceeded: {needed} configurations requested, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("edge ({0}, {1}) is not in the locale")]
    EdgeNotInLocale(usize, usize),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("form is not closed: {0}")]
    NotClosed(String),
    #[error("expansion input is not normalized: base piece equals {0}")]
    NotNormalized(f64),
    #[error("degenerate denominator: a function with vanishing move energy has nonzero exchange energy")]
    DegenerateDenominator,
    #[error("not irreducibly quantified on {0}")]
    NotIrreduciblyQuantified(String),
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),
    #[error("window does not fit in box: {0}")]
    WindowExceedsBox(String),
}

pub type Result<T> = std::result::Result<T, Error>;
