//! Finite-element functions stored by vertex values.

use crate::mesh::{QuadMesh, VertexOrigin};

use super::dofmap::DofMap;
use super::element::{value_grad, CellMap};

/// A Q1 function given by its values at all mesh vertices (hanging and
/// Dirichlet vertices included).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFn {
    pub values: Vec<f64>,
}

impl FieldFn {
    pub fn zeros(n_vertices: usize) -> Self {
        Self {
            values: vec![0.0; n_vertices],
        }
    }

    pub fn from_free(dofmap: &DofMap, x: &[f64]) -> Self {
        Self {
            values: dofmap.expand(x),
        }
    }

    pub fn free(&self, dofmap: &DofMap) -> Vec<f64> {
        dofmap.restrict(&self.values)
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &QuadMesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            values: mesh.vertices().iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn cell_values(&self, mesh: &QuadMesh, c: usize) -> [f64; 4] {
        mesh.cell(c).vertices.map(|v| self.values[v])
    }

    /// Value and gradient at reference point `xi` of cell `c`.
    pub fn eval(&self, mesh: &QuadMesh, c: usize, xi: [f64; 2]) -> (f64, [f64; 2]) {
        let mp = CellMap::new(mesh.cell_points(c)).at(xi);
        value_grad(&self.cell_values(mesh, c), &mp)
    }

    /// Carry the function to a refinement of its mesh: new vertices take the
    /// bilinear interpolant. Constraints of the new mesh are re-applied by
    /// passing through `dofmap`.
    pub fn transfer(&self, fine: &QuadMesh, dofmap: &DofMap) -> Self {
        let mut values = self.values.clone();
        values.resize(fine.n_vertices(), 0.0);
        for v in self.values.len()..fine.n_vertices() {
            values[v] = match fine.origin(v) {
                VertexOrigin::Initial => 0.0,
                VertexOrigin::EdgeMidpoint([a, b]) => 0.5 * (values[a] + values[b]),
                VertexOrigin::CellCenter(vs) => 0.25 * vs.iter().map(|&u| values[u]).sum::<f64>(),
            };
        }
        Self {
            values: dofmap.expand(&dofmap.restrict(&values)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{unit_square, BoundaryMarker};
    use std::collections::BTreeSet;

    #[test]
    fn transfer_reproduces_bilinear_functions() {
        let m = unit_square(2, BoundaryMarker::DirichletOuter);
        let f = |p: [f64; 2]| 1.0 + p[0] - 2.0 * p[1] + 3.0 * p[0] * p[1];
        let d0 = DofMap::build(&m, |_| false);
        let u = FieldFn::interpolate(&m, f);
        let fine = m.refine(&BTreeSet::from([0, 3]));
        let d1 = DofMap::build(&fine, |_| false);
        let v = u.transfer(&fine, &d1);
        for c in fine.active_cells() {
            let (val, _) = v.eval(&fine, c, [0.3, 0.7]);
            let x = crate::fem::CellMap::new(fine.cell_points(c)).map([0.3, 0.7]);
            assert!((val - f(x)).abs() < 1e-14);
        }
        assert_eq!(u.free(&d0).len(), 9);
    }
}
