//! Adaptive finite elements for nonlinear optimal control problems, with
//! goal-oriented error estimation that balances discretization and
//! iteration errors.

pub mod driver;
pub mod estimator;
pub mod fem;
pub mod kkt;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod scalar;

pub use scalar::Scalar;

/// Sparse matrix in double precision.
pub type Matrix = linalg::SparseMatrix<f64>;
/// Second-order jet over the control variables.
pub type ControlJet = problems::ControlJet;
