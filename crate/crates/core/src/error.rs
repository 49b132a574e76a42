use thiserror::Error;

use crate::grid::GridId;

/// Errors raised by grid construction, operators, laws, models and steppers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("axis {axis}: n_cells = {n_cells} is below the minimum of 3")]
    TooFewCells { axis: usize, n_cells: usize },

    #[error("axis {axis}: length {length} must be positive and finite")]
    InvalidLength { axis: usize, length: f64 },

    #[error("grid must have 1 or 2 dimensions, got {0}")]
    UnsupportedDims(usize),

    #[error("expected {expected} entries per axis, got {found}")]
    AxisCountMismatch { expected: usize, found: usize },

    #[error("field belongs to grid {found:?}, expected grid {expected:?}")]
    GridMismatch { expected: GridId, found: GridId },

    #[error("field has {found} entries, grid needs {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("{quantity} is undefined at {value}")]
    OutOfDomain { quantity: &'static str, value: f64 },

    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("dense assembly needs {unknowns} unknowns, limit is {limit}")]
    DenseTooLarge { unknowns: usize, limit: usize },

    #[error("matrix dimensions do not match: {0}")]
    DimensionMismatch(String),

    #[error("state left the physical range: {0}")]
    NonPhysical(String),

    #[error("state does not match model kind {0}")]
    StateMismatch(&'static str),

    #[error("fixed-point iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
