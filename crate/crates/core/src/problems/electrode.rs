//! Micro-pipette electrode: hole positions and sizes steer the current
//! leaving the pipette walls.

use serde::{Deserialize, Serialize};

use crate::mesh::{make_pipette_mesh, BoundaryMarker, PipetteGeometry, Point, QuadMesh};

use super::circuit::{current_densities, CircuitParams, DesignVector};
use super::{BoundaryFlux, ControlJet, HoleTerm, ProblemDefinition, ProblemError, MAX_CONTROLS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElectrodeConfig {
    pub geometry: PipetteGeometry,
    pub sigma: f64,
    pub i_bar: f64,
    pub beta: u32,
    pub design: DesignVector,
    /// Tracking target `û` on the observation region.
    pub target: f64,
    pub alpha: f64,
}

impl Default for ElectrodeConfig {
    fn default() -> Self {
        Self {
            geometry: PipetteGeometry::default(),
            sigma: 1.72,
            i_bar: 50.0,
            beta: 2,
            design: DesignVector {
                m: vec![10.0, 20.0],
                s: vec![1.0, 2.0],
                free_m: vec![true, true],
                free_s: vec![false, false],
            },
            target: 5.0,
            alpha: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ElectrodeProblem {
    pub cfg: ElectrodeConfig,
    pub circuit: CircuitParams,
}

impl ElectrodeProblem {
    pub fn new(cfg: ElectrodeConfig) -> Result<Self, ProblemError> {
        let g = &cfg.geometry;
        let circuit = CircuitParams {
            sigma: cfg.sigma,
            theta_deg: g.theta_deg,
            d: g.wall,
            s0: g.tip_opening,
            i_bar: cfg.i_bar,
            beta: cfg.beta,
            y_tip: g.y_tip,
            y_up: g.height,
        };
        circuit.validate()?;
        let d = &cfg.design;
        if d.s.len() != d.m.len() || d.pairs() > 2 {
            return Err(ProblemError::Unsupported(format!(
                "design needs matching m and s with at most two pairs, got {} and {}",
                d.m.len(),
                d.s.len()
            )));
        }
        if d.n_free() > MAX_CONTROLS {
            return Err(ProblemError::Unsupported(
                "too many free design entries".into(),
            ));
        }
        Ok(Self { cfg, circuit })
    }

    /// Design with the free entries taken from `q`.
    pub fn design_at(&self, q: &[f64]) -> DesignVector {
        self.cfg.design.with_free_values(q)
    }

    /// Current densities `(J_0, J_1, ..)` at control `q`, with derivatives.
    pub fn densities(&self, q: &[f64]) -> Result<Vec<ControlJet>, ProblemError> {
        let (m, s) = self.jets(q);
        current_densities(&self.circuit, &m, &s)
    }

    fn jets(&self, q: &[f64]) -> (Vec<ControlJet>, Vec<ControlJet>) {
        let d = &self.cfg.design;
        let at = self.design_at(q);
        let mut slot = 0;
        let mut seed = |v: f64, free: bool| {
            if free {
                slot += 1;
                ControlJet::variable(v, slot - 1)
            } else {
                ControlJet::constant(v)
            }
        };
        let m = (0..d.pairs())
            .map(|k| seed(at.m[k], d.is_free_m(k)))
            .collect();
        let s = (0..d.pairs())
            .map(|k| seed(at.s[k], d.is_free_s(k)))
            .collect();
        (m, s)
    }
}

impl ProblemDefinition for ElectrodeProblem {
    fn name(&self) -> String {
        format!("electrode_{}_pairs", self.cfg.design.pairs())
    }

    fn sigma(&self) -> f64 {
        self.cfg.sigma
    }

    fn alpha(&self) -> f64 {
        self.cfg.alpha
    }

    fn control_dim(&self) -> usize {
        self.cfg.design.n_free()
    }

    fn initial_control(&self) -> Vec<f64> {
        self.cfg.design.free_values()
    }

    fn is_dirichlet(&self, marker: BoundaryMarker) -> bool {
        marker == BoundaryMarker::DirichletOuter
    }

    fn source(&self, _x: Point, _q: &[f64]) -> ControlJet {
        ControlJet::constant(0.0)
    }

    fn target(&self, _x: Point) -> f64 {
        self.cfg.target
    }

    fn boundary_flux(&self, q: &[f64]) -> Result<BoundaryFlux, ProblemError> {
        let (m, s) = self.jets(q);
        let j = current_densities(&self.circuit, &m, &s)?;
        let holes = (0..m.len())
            .map(|k| HoleTerm {
                m: m[k],
                s: s[k],
                j: j[k + 1],
            })
            .collect();
        Ok(BoundaryFlux::Pipette {
            tip: j[0],
            holes,
            y_tip: self.circuit.y_tip,
            beta: self.circuit.beta,
        })
    }

    fn initial_mesh(&self) -> Result<QuadMesh, ProblemError> {
        Ok(make_pipette_mesh(&self.cfg.geometry)?.refine_global())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tip_and_hole_densities() {
        let p = ElectrodeProblem::new(ElectrodeConfig::default()).unwrap();
        let q = p.initial_control();
        assert_eq!(q, vec![10.0, 20.0]);
        let f = p.boundary_flux(&q).unwrap();
        let tip = f.eval([20.0, 20.0], BoundaryMarker::PipTip).unwrap();
        assert!((tip.val - 1.17399306647472 / 1.5).abs() < 1e-12);
        // at the first hole centre the second term is negligible
        let wall = f.eval([10.0, 30.0], BoundaryMarker::PipWall).unwrap();
        assert!((wall.val - 2.82536099491201).abs() < 1e-9);
        let j = p.densities(&q).unwrap();
        assert!((j[2].val - 21.5876424718506 / 2.0).abs() < 1e-11);
    }

    #[test]
    fn fixed_entries_carry_no_derivatives() {
        let mut cfg = ElectrodeConfig::default();
        cfg.design.free_m = vec![false, true];
        cfg.design.free_s = vec![true, false];
        let p = ElectrodeProblem::new(cfg).unwrap();
        assert_eq!(p.initial_control(), vec![20.0, 1.0]);
        let j = p.densities(&[20.0, 1.0]).unwrap();
        assert!(j[0].grad[2..].iter().all(|&g| g == 0.0));
        assert!(j[0].grad[0] != 0.0 && j[0].grad[1] != 0.0);
    }

    #[test]
    fn rejects_degenerate_setups() {
        let mut cfg = ElectrodeConfig::default();
        cfg.geometry.theta_deg = 0.0;
        assert!(ElectrodeProblem::new(cfg).is_err());
        let mut cfg = ElectrodeConfig::default();
        cfg.design.m.push(30.0);
        cfg.design.s.push(1.0);
        assert!(matches!(
            ElectrodeProblem::new(cfg),
            Err(ProblemError::Unsupported(_))
        ));
    }
}
