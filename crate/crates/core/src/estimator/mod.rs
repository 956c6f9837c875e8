//! Goal-oriented error estimation: the discretization part `η_h` from
//! patchwise higher-order weights, the iteration part `η_KKT`, effectivity
//! indices and bulk marking.
//!
//! With `ρ(w)(φ) = -L'(w)(φ)` and the dual solution `z` of `H z = -ℐ'`,
//!
//! ```text
//! ℐ(w) - ℐ(w̃_h) ≈ η_h + η_KKT
//! η_h   = ½ ρ(w̃_h)(Π_h z^u, 0, Π_h z^λ) + ½ ρ*(w̃_h, z̃_h)(Π_h u, 0, Π_h λ)
//! η_KKT = -ρ(w̃_h)(z̃_h)
//! ```
//!
//! The localized form integrates the diffusion terms by parts on every cell:
//! strong cell residuals (the Laplacian of a Q1 field vanishes on
//! parallelograms only) plus face terms `σ/2 [∂_n v]` on interior faces,
//! `σ ∂_n v` on Neumann faces and nothing on Dirichlet faces.

mod dwr;
mod marking;

pub use dwr::{
    estimate, eta_h_localized, eta_kkt, weighted_residual, weighted_residual_terms,
    EstimatorReport, Weights,
};
pub use marking::{mark, MarkStrategy};

use thiserror::Error;

use crate::kkt::KktError;
use crate::mesh::MeshError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Kkt(#[from] KktError),
    #[error("goal error {error:e} too small to form an effectivity index")]
    DivisionNearZero { error: f64 },
}

/// `η / (ℐ(w) - ℐ(w̃_h))`, sign kept.
pub fn effectivity(
    eta: f64,
    reference_goal: f64,
    current_goal: f64,
) -> Result<f64, EstimatorError> {
    let error = reference_goal - current_goal;
    let scale = reference_goal
        .abs()
        .max(current_goal.abs())
        .max(f64::MIN_POSITIVE);
    if error.abs() <= 1e-14 * scale {
        return Err(EstimatorError::DivisionNearZero { error });
    }
    Ok(eta / error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effectivity_sign_and_guard() {
        assert_eq!(effectivity(0.5, 2.0, 1.5).unwrap(), 1.0);
        assert!(effectivity(0.5, 1.0, 1.5).unwrap() < 0.0);
        assert!(matches!(
            effectivity(1.0, 1.0, 1.0),
            Err(EstimatorError::DivisionNearZero { .. })
        ));
    }
}
