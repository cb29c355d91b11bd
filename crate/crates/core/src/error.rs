use thiserror::Error;

use crate::wand::OddPeriodCertificate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("tree order k must be at least 2, got {0}")]
    InvalidOrder(u32),

    #[error("period must be a positive integer, got {0}")]
    InvalidPeriod(usize),

    /// Construction of a reduced system with an odd period. The certificate
    /// carries the linear identity that forces an odd coordinate to vanish.
    #[error("no-odd-period: period {} is odd, so no strictly positive periodic solution exists ({})", .0.period, .0)]
    NoOddPeriod(Box<OddPeriodCertificate>),

    #[error("odd-period witness requested for even period {0}")]
    EvenPeriod(usize),

    #[error("invalid activity profile: {0}")]
    InvalidActivities(String),

    #[error("invalid boundary law: {0}")]
    InvalidLaw(String),

    #[error("entry {index} must be strictly positive and finite, got {value}")]
    NonPositive { index: usize, value: f64 },

    #[error("expected {expected} unknowns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bracket violation: {0}")]
    BracketViolation(String),

    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("unknown map family `{0}`")]
    UnknownFamily(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("low-order coefficients of the expansion do not vanish for k = {0}")]
    LowCoefficientsNonzero(u32),
}

pub(crate) fn check_order(k: u32) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidOrder(k));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )));
    }
    Ok(())
}
