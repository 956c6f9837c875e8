//! Neumann data of the model problems.

use crate::fem::{boundary_quadrature, FemError, LineRule};
use crate::mesh::{BoundaryMarker, Point};
use crate::scalar::Scalar;

use super::ControlJet;

/// Mollified flux through the wall holes at height `y` above the tip:
/// `Σ_k J_k exp(-(2 (y - m_k) / s_k)^(2β))`, one term per hole pair. Each
/// term is a smoothed indicator of `|y - m_k| < s_k / 2`.
pub fn gtilde<S: Scalar>(y: f64, m: &[S], s: &[S], j: &[S], beta: u32) -> S {
    let mut out = S::cst(0.0);
    for k in 0..m.len() {
        out += hole_term(y, m[k], s[k], j[k], beta);
    }
    out
}

#[inline]
fn hole_term<S: Scalar>(y: f64, m: S, s: S, j: S, beta: u32) -> S {
    let x = S::cst(2.0) * (S::cst(y) - m) / s;
    let arg = x.powi(2 * beta as i32);
    j * (-arg).exp()
}

/// One hole pair as seen by the flux: position, size and current density,
/// each carrying derivatives in the controls.
#[derive(Clone, Copy, Debug)]
pub struct HoleTerm {
    pub m: ControlJet,
    pub s: ControlJet,
    pub j: ControlJet,
}

/// Boundary flux density `g(x, q)` (the `(g, φ)_Γ` term of the state
/// equation), with first and second derivatives in `q`.
#[derive(Clone, Debug)]
pub enum BoundaryFlux {
    None,
    /// `coeff(q) · profile(x)` on faces with `marker`.
    Separable {
        marker: BoundaryMarker,
        coeff: ControlJet,
        profile: fn(Point) -> f64,
    },
    /// Constant density on the tip opening, mollified hole flux on the walls.
    Pipette {
        tip: ControlJet,
        holes: Vec<HoleTerm>,
        y_tip: f64,
        beta: u32,
    },
}

const FACE_POINTS: usize = 4;
const FACE_REL_TOL: f64 = 1e-10;

impl BoundaryFlux {
    pub fn eval(&self, x: Point, marker: BoundaryMarker) -> Option<ControlJet> {
        match self {
            BoundaryFlux::None => None,
            BoundaryFlux::Separable {
                marker: m,
                coeff,
                profile,
            } => (*m == marker).then(|| coeff.scale(profile(x))),
            BoundaryFlux::Pipette {
                tip,
                holes,
                y_tip,
                beta,
            } => match marker {
                BoundaryMarker::PipTip => Some(*tip),
                BoundaryMarker::PipWall => {
                    let y = x[1] - y_tip;
                    let mut g = ControlJet::constant(0.0);
                    for h in holes {
                        g += hole_term(y, h.m, h.s, h.j, *beta);
                    }
                    Some(g)
                }
                _ => None,
            },
        }
    }

    /// Rule in the face parameter `t ∈ [0, 1]` resolving the flux on the
    /// face from `a` to `b`; `None` when the face carries no flux.
    pub fn face_rule(
        &self,
        a: Point,
        b: Point,
        marker: BoundaryMarker,
    ) -> Result<Option<LineRule>, FemError> {
        match self {
            BoundaryFlux::None => Ok(None),
            BoundaryFlux::Separable { marker: m, .. } => {
                Ok((*m == marker).then(|| LineRule::composite(FACE_POINTS, 1)))
            }
            BoundaryFlux::Pipette {
                tip,
                holes,
                y_tip,
                beta,
            } => match marker {
                BoundaryMarker::PipTip => Ok(Some(LineRule::composite(FACE_POINTS, 1))),
                BoundaryMarker::PipWall => {
                    let peak = holes
                        .iter()
                        .fold(tip.val.abs(), |p, h| p.max(h.j.val.abs()));
                    let f = |t: f64| {
                        let y = a[1] + t * (b[1] - a[1]) - y_tip;
                        holes
                            .iter()
                            .map(|h| hole_term(y, h.m.val, h.s.val, h.j.val, *beta))
                            .sum::<f64>()
                    };
                    boundary_quadrature(f, FACE_REL_TOL, peak).map(Some)
                }
                _ => Ok(None),
            },
        }
    }
}
