//! Unit square with a slit, controlled through the flux on the upper edge.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::mesh::{make_slit_mesh, BoundaryMarker, Point, QuadMesh};

use super::{control_jets, BoundaryFlux, ControlJet, ProblemDefinition, ProblemError, Reaction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlitVariant {
    /// `-σΔu = 0`, `σ∂_n u = σ q² π sin(πx)` on the top edge.
    Linear,
    /// As `Linear` with flux `σ q π sin(πx)`; linear-quadratic.
    LinearFlux,
    /// `-σΔu + u² = c 2π² sin(πx) sin(πy)` with `c = source_scale`, flux
    /// as `Linear`.
    Nonlinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlitConfig {
    pub variant: SlitVariant,
    pub sigma: f64,
    pub alpha: f64,
    pub q0: f64,
    /// Factor on the volume source of the nonlinear variant.
    pub source_scale: f64,
    /// Cells per side of the unrefined grid (even).
    pub n0: usize,
}

impl Default for SlitConfig {
    fn default() -> Self {
        Self {
            variant: SlitVariant::Linear,
            sigma: 1.72,
            alpha: 1e-4,
            q0: 1.0,
            source_scale: -1.0,
            n0: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SlitProblem {
    pub cfg: SlitConfig,
}

impl SlitProblem {
    pub fn new(cfg: SlitConfig) -> Self {
        Self { cfg }
    }

    pub fn variant(variant: SlitVariant) -> Self {
        Self::new(SlitConfig {
            variant,
            ..Default::default()
        })
    }
}

fn top_profile(x: Point) -> f64 {
    PI * (PI * x[0]).sin()
}

impl ProblemDefinition for SlitProblem {
    fn name(&self) -> String {
        format!("slit_{:?}", self.cfg.variant).to_lowercase()
    }

    fn sigma(&self) -> f64 {
        self.cfg.sigma
    }

    fn alpha(&self) -> f64 {
        self.cfg.alpha
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn initial_control(&self) -> Vec<f64> {
        vec![self.cfg.q0]
    }

    fn is_dirichlet(&self, marker: BoundaryMarker) -> bool {
        marker != BoundaryMarker::SlitTop
    }

    fn reaction(&self) -> Reaction {
        match self.cfg.variant {
            SlitVariant::Nonlinear => Reaction::Quadratic,
            _ => Reaction::None,
        }
    }

    fn source(&self, x: Point, _q: &[f64]) -> ControlJet {
        match self.cfg.variant {
            SlitVariant::Nonlinear => ControlJet::constant(
                self.cfg.source_scale * 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin(),
            ),
            _ => ControlJet::constant(0.0),
        }
    }

    fn target(&self, x: Point) -> f64 {
        (PI * x[0]).sin() * (PI * x[1]).sin() / self.cfg.sigma
    }

    fn boundary_flux(&self, q: &[f64]) -> Result<BoundaryFlux, ProblemError> {
        let j = control_jets(q)[0];
        let coeff = match self.cfg.variant {
            SlitVariant::LinearFlux => j,
            _ => j * j,
        };
        Ok(BoundaryFlux::Separable {
            marker: BoundaryMarker::SlitTop,
            coeff: coeff.scale(self.cfg.sigma),
            profile: top_profile,
        })
    }

    fn initial_mesh(&self) -> Result<QuadMesh, ProblemError> {
        Ok(make_slit_mesh(self.cfg.n0)?.refine_global())
    }
}
