//! Distributed control of a constant source on the unit square; small enough
//! for closed-form optima.

use serde::{Deserialize, Serialize};

use crate::mesh::{unit_square, BoundaryMarker, Point, QuadMesh};

use super::{control_jets, BoundaryFlux, ControlJet, ProblemDefinition, ProblemError};

/// `-σΔu = q` in the unit square, `u = 0` on the boundary, tracking the
/// constant `target` everywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SquareSource {
    pub sigma: f64,
    pub alpha: f64,
    pub target: f64,
    pub q0: f64,
    /// Cells per side of the initial mesh (even).
    pub n: usize,
}

impl Default for SquareSource {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            alpha: 1e-2,
            target: 1.0,
            q0: 0.0,
            n: 2,
        }
    }
}

impl ProblemDefinition for SquareSource {
    fn name(&self) -> String {
        "square_source".into()
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn initial_control(&self) -> Vec<f64> {
        vec![self.q0]
    }

    fn is_dirichlet(&self, _marker: BoundaryMarker) -> bool {
        true
    }

    fn source(&self, _x: Point, q: &[f64]) -> ControlJet {
        control_jets(q)[0]
    }

    fn target(&self, _x: Point) -> f64 {
        self.target
    }

    fn boundary_flux(&self, _q: &[f64]) -> Result<BoundaryFlux, ProblemError> {
        Ok(BoundaryFlux::None)
    }

    fn initial_mesh(&self) -> Result<QuadMesh, ProblemError> {
        if self.n < 2 || self.n % 2 != 0 {
            return Err(crate::mesh::MeshError::InvalidResolution(self.n).into());
        }
        Ok(unit_square(self.n / 2, BoundaryMarker::DirichletOuter).refine_global())
    }
}
