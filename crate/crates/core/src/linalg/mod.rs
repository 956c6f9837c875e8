//! Sparse matrices and a direct solver for the KKT systems.

mod lu;
mod market;
pub mod ordering;
mod sparse;

pub use lu::{factorize, factorize_with, Factorization};
pub use market::write_matrix_market;
pub use ordering::Ordering;
pub use sparse::SparseMatrix;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is numerically singular (no acceptable pivot in column {row})")]
    SingularMatrix { row: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({n_rows}x{n_cols})")]
    NotSquare { n_rows: usize, n_cols: usize },
    #[error("entry ({row}, {col}) outside a {n_rows}x{n_cols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
}
