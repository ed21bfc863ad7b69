use thiserror::Error;

/// Errors raised by model construction and the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("adoption fraction {0} is outside [0, 1]")]
    FractionOutOfRange(f64),

    #[error("lambert W argument {0} is below the branch point -1/e")]
    LambertDomain(f64),

    #[error("expected {expected} prices, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("price sensitivity alpha = {0} must be normalized to 1 first")]
    AlphaNotNormalized(f64),

    #[error("series needs at least 4 periods, got {0}")]
    TooFewPeriods(usize),

    #[error("invalid series at period {index}: {reason}")]
    InvalidSeries { index: usize, reason: String },

    #[error("observed adoption is constant; NRMSE is undefined")]
    DegenerateData,

    #[error("horizon must be {expected} for this solver, got {actual}")]
    HorizonMismatch { expected: usize, actual: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_fraction(f: f64) -> Result<()> {
    if (0.0..=1.0).contains(&f) {
        Ok(())
    } else {
        Err(Error::FractionOutOfRange(f))
    }
}
