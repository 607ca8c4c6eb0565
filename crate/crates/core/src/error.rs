use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point outside the domain: {0}")]
    Domain(String),
    #[error("unsupported dimension d = {0} (only d = 3 is implemented)")]
    UnsupportedDimension(usize),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error(
        "no convergence after {iterations} iterations (last relative residual {residual:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("divergent integral: {0}")]
    Divergent(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
