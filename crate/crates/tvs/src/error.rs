use thiserror::Error;

/// Errors produced by the TVS regression library.
#[derive(Debug, Error)]
pub enum TvsError {
    #[error("time series must contain at least one value")]
    EmptySeries,

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shift vector has {got} entries but the impulse set has {expected}")]
    ShiftLengthMismatch { got: usize, expected: usize },

    #[error("series lengths differ: {got} vs {expected}")]
    SeriesLengthMismatch { got: usize, expected: usize },

    #[error("shift {shift} moves impulse {index} (position {position}) past the series end")]
    ShiftOutOfRange {
        index: usize,
        position: usize,
        shift: usize,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("exhaustive search would enumerate {combinations} candidates, above the budget of {budget}")]
    BudgetExceeded { combinations: u128, budget: u128 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, TvsError>;
