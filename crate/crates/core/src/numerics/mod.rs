//! Dense and sparse matrices, reverse-mode differentiation, Adam and seeded
//! random streams. Double precision throughout; all values are rank <= 2.

mod adam;
mod gradcheck;
pub mod rng;
mod sparse;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{gradient_check, GradCheck};
pub use sparse::SparseMatrix;
pub use tape::{leaky_relu, log_sigmoid, sigmoid, Gradients, Tape, Var};
pub use tensor::{dot, Tensor};

/// Default negative slope of LeakyReLU.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: incompatible shapes {}x{} and {}x{}", .left.0, .left.1, .right.0, .right.1)]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{len} values cannot fill a {rows}x{cols} tensor")]
    Length { rows: usize, cols: usize, len: usize },
    #[error("sparse entry ({row}, {col}) outside {rows}x{cols}")]
    SparseIndex { row: usize, col: usize, rows: usize, cols: usize },
    #[error("row index {index} out of range for {rows} rows")]
    RowIndex { index: usize, rows: usize },
    #[error("backward needs a 1x1 loss, got {}x{}", .0.0, .0.1)]
    NonScalarLoss((usize, usize)),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("{0}: no operands")]
    Empty(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl NumericsError {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        NumericsError::Shape { op, left, right }
    }
}
