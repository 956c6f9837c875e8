//! Coupled optimality system: residual, Hessian, damped Newton steps and the
//! dual solve that shares the Hessian factorization.

mod newton;
mod reduced;
mod system;

pub use newton::{linearize, newton_step, Linearization, NewtonConfig, StepReport};
pub use reduced::{minimize_reduced, minimize_reduced_within, Constraint, ReducedOutcome};
pub use system::{Discretization, DualState, KktState};

use thiserror::Error;

use crate::fem::FemError;
use crate::linalg::LinalgError;
use crate::problems::ProblemError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KktError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("state has {found} controls, the problem expects {expected}")]
    ControlDimension { expected: usize, found: usize },
    #[error("control block of the Hessian inverse is singular")]
    SingularControlBlock,
}
