use thiserror::Error;

/// Errors raised by the reduction and inference routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("arithmetic overflow computing {0}")]
    Overflow(&'static str),

    #[error("size guard exceeded: {what} would need {size} entries (limit {limit})")]
    SizeGuard {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parameter {value} outside admissible range [{low}, {high}]")]
    ParameterOutOfRange { value: f64, low: f64, high: f64 },

    #[error("requested {requested} modes but the snapshot matrix has numerical rank {rank}")]
    RankTooLow { requested: usize, rank: usize },

    #[error("initial condition is not in the reduced space (relative residual {residual:e})")]
    NotInSubspace { residual: f64 },

    #[error("interpolation point {value} outside the parameter grid [{low}, {high}]")]
    Extrapolation { value: f64, low: f64, high: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero reference norm in {0}")]
    ZeroNorm(&'static str),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
