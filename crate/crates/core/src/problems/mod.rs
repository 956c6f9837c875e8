//! Optimal control problems: cost, state equation, goal functional and the
//! electrode circuit model.

pub mod circuit;
mod electrode;
pub mod flux;
mod jet;
mod model;
mod slit;

pub use circuit::{
    admissible_constraints, circuit_currents, current_densities, CircuitParams, DesignVector,
};
pub use electrode::{ElectrodeConfig, ElectrodeProblem};
pub use flux::{gtilde, BoundaryFlux, HoleTerm};
pub use jet::Jet2;
pub use model::SquareSource;
pub use slit::{SlitConfig, SlitProblem, SlitVariant};

use thiserror::Error;

use crate::fem::FemError;
use crate::mesh::{BoundaryMarker, MeshError, Point, QuadMesh};

/// Largest number of controls a problem may expose.
pub const MAX_CONTROLS: usize = 4;

/// Value with first and second derivatives in the controls.
pub type ControlJet = Jet2<f64, MAX_CONTROLS>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Zero-order term `N(u)` of the state equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reaction {
    None,
    /// `N(u) = u²`
    Quadratic,
}

impl Reaction {
    /// `(N(u), N'(u), N''(u))`
    pub fn eval(self, u: f64) -> (f64, f64, f64) {
        match self {
            Reaction::None => (0.0, 0.0, 0.0),
            Reaction::Quadratic => (u * u, 2.0 * u, 2.0),
        }
    }
}

/// An optimal control problem
///
/// ```text
/// min J(u, q) = ½ ∫_obs (u - û)² + α/2 |q|²
/// s.t. σ(∇u, ∇φ) + (N(u), φ) = (f(q), φ) + (g(q), φ)_Γ
/// ```
///
/// with goal functional `ℐ(u, q) = |q|²`. The observation region is the
/// mesh's observation rectangle when present, the whole domain otherwise.
pub trait ProblemDefinition: Send + Sync {
    fn name(&self) -> String;
    fn sigma(&self) -> f64;
    fn alpha(&self) -> f64;
    fn control_dim(&self) -> usize;
    fn initial_control(&self) -> Vec<f64>;
    fn is_dirichlet(&self, marker: BoundaryMarker) -> bool;

    fn reaction(&self) -> Reaction {
        Reaction::None
    }

    /// Volume source `f(x, q)`.
    fn source(&self, x: Point, q: &[f64]) -> ControlJet;

    /// Tracking target `û(x)`.
    fn target(&self, x: Point) -> f64;

    fn boundary_flux(&self, q: &[f64]) -> Result<BoundaryFlux, ProblemError>;

    /// Coarsest mesh; every active cell belongs to a complete patch.
    fn initial_mesh(&self) -> Result<QuadMesh, ProblemError>;

    fn goal(&self, q: &[f64]) -> f64 {
        q.iter().map(|v| v * v).sum()
    }

    fn goal_gradient(&self, q: &[f64]) -> Vec<f64> {
        q.iter().map(|v| 2.0 * v).collect()
    }
}

/// Seed the controls as jet variables.
pub fn control_jets(q: &[f64]) -> Vec<ControlJet> {
    assert!(q.len() <= MAX_CONTROLS, "at most {MAX_CONTROLS} controls");
    q.iter()
        .enumerate()
        .map(|(i, &v)| ControlJet::variable(v, i))
        .collect()
}
