use thiserror::Error;

/// Errors raised by the pricing and analytics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value for `{0}`")]
    NonFinite(&'static str),

    #[error("degenerate volatility: sigma * sqrt(tau) must be positive")]
    DegenerateVol,

    #[error("price {price} has no implied volatility: must lie below the upper bound {upper}")]
    NoSolution { price: f64, upper: f64 },

    #[error("implied volatility did not converge after {iterations} iterations; best bracket [{lo}, {hi}]")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },

    #[error("empty path batch")]
    EmptyBatch,

    #[error("date {0} is not a node of the simulation grid")]
    OffGrid(f64),

    #[error("non-finite simulated state on path {path} at step {step} (y = {y}, x = {x})")]
    NonFiniteState { path: u64, step: usize, y: f64, x: f64 },

    #[error("{excluded} of {total} samples have |sigma_s| below the division threshold")]
    DivisionHazard { excluded: u64, total: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn finite(value: f64, name: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(name))
    }
}
