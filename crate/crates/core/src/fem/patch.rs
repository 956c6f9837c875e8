//! Patchwise biquadratic interpolation on the four children of a refined
//! cell, used to approximate the continuous weights of the estimator.

use crate::mesh::{edge_key, Face, MeshError, QuadMesh};

use super::element::{shape, shape_grad_ref};

/// Value of a patch node: a vertex value, or a combination taken from the
/// quadratic of a coarser neighboring patch along a shared edge.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Node {
    Vertex(usize),
    Quarter { near: usize, mid: usize, far: usize },
}

#[derive(Clone, Debug)]
struct Patch {
    nodes: [Node; 9],
}

/// Child `k` covers `[ox, ox+½] × [oy, oy+½]` of the parent reference square.
const CHILD_OFFSET: [[f64; 2]; 4] = [[0.0, 0.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];

#[derive(Clone, Debug)]
pub struct PatchInterpolator {
    /// For every cell id: (patch index, child position) if active.
    cell_patch: Vec<Option<(usize, usize)>>,
    patches: Vec<Patch>,
}

/// 1D quadratic Lagrange basis on nodes 0, ½, 1 and its derivative.
#[inline]
fn lagrange(t: f64) -> ([f64; 3], [f64; 3]) {
    (
        [
            2.0 * (t - 0.5) * (t - 1.0),
            -4.0 * t * (t - 1.0),
            2.0 * t * (t - 0.5),
        ],
        [4.0 * t - 3.0, -8.0 * t + 4.0, 4.0 * t - 1.0],
    )
}

impl PatchInterpolator {
    pub fn new(mesh: &QuadMesh) -> Result<Self, MeshError> {
        let mut cell_patch = vec![None; mesh.n_cells()];
        let mut patches = Vec::new();
        let mut index_of_parent = std::collections::HashMap::new();
        for c in mesh.active_cells() {
            let (parent, kids) = mesh.patch_parent(c)?;
            let pi = *index_of_parent.entry(parent).or_insert_with(|| {
                patches.push(Self::build_patch(mesh, kids));
                patches.len() - 1
            });
            let pos = kids
                .iter()
                .position(|&k| k == c)
                .expect("child of its parent");
            cell_patch[c] = Some((pi, pos));
        }
        Ok(Self {
            cell_patch,
            patches,
        })
    }

    fn build_patch(mesh: &QuadMesh, kids: [usize; 4]) -> Patch {
        let cv = kids.map(|k| mesh.cell(k).vertices);
        let mut nodes = [
            cv[0][0], cv[0][1], cv[1][1], //
            cv[0][3], cv[0][2], cv[2][1], //
            cv[3][3], cv[2][3], cv[2][2],
        ]
        .map(Node::Vertex);
        // side s: (child touching it, its local edge, node index of the side midpoint)
        let sides = [(0usize, 0usize, 1usize), (1, 1, 5), (2, 2, 7), (3, 3, 3)];
        for (child, e, node) in sides {
            let Face::Coarser { parent_edge, .. } = mesh.face(kids[child], e) else {
                continue;
            };
            let Some(long) = mesh.parent_edge(parent_edge.0, parent_edge.1) else {
                continue;
            };
            let mid = mesh
                .edge_midpoint(long.0, long.1)
                .expect("split edge has a midpoint");
            let (near, far) = if parent_edge.0 == long.0 || parent_edge.1 == long.0 {
                (long.0, long.1)
            } else {
                (long.1, long.0)
            };
            debug_assert_eq!(edge_key(near, mid), parent_edge);
            nodes[node] = Node::Quarter { near, mid, far };
        }
        Patch { nodes }
    }

    fn locate(&self, c: usize) -> (usize, usize) {
        self.cell_patch[c].expect("cell is active and has a patch")
    }

    /// The nine nodal values of the patch containing `c`.
    pub fn nodal_values(&self, c: usize, values: &[f64]) -> [f64; 9] {
        let (pi, _) = self.locate(c);
        self.patches[pi].nodes.map(|n| match n {
            Node::Vertex(v) => values[v],
            Node::Quarter { near, mid, far } => {
                0.375 * values[near] + 0.75 * values[mid] - 0.125 * values[far]
            }
        })
    }

    /// Π_h v = I_2h v − v at reference point `xi` of cell `c`: value and
    /// gradient with respect to the cell's reference coordinates.
    pub fn eval_ref(
        &self,
        c: usize,
        nodal: &[f64; 9],
        cell_vals: &[f64; 4],
        xi: [f64; 2],
    ) -> (f64, [f64; 2]) {
        let (_, pos) = self.locate(c);
        let o = CHILD_OFFSET[pos];
        let (lx, dlx) = lagrange(o[0] + 0.5 * xi[0]);
        let (ly, dly) = lagrange(o[1] + 0.5 * xi[1]);
        let mut q = 0.0;
        let mut dq = [0.0; 2];
        for j in 0..3 {
            for i in 0..3 {
                let v = nodal[3 * j + i];
                q += v * lx[i] * ly[j];
                dq[0] += v * dlx[i] * ly[j];
                dq[1] += v * lx[i] * dly[j];
            }
        }
        let n = shape(xi);
        let g = shape_grad_ref(xi);
        let mut l = 0.0;
        let mut dl = [0.0; 2];
        for k in 0..4 {
            l += cell_vals[k] * n[k];
            dl[0] += cell_vals[k] * g[k][0];
            dl[1] += cell_vals[k] * g[k][1];
        }
        (q - l, [0.5 * dq[0] - dl[0], 0.5 * dq[1] - dl[1]])
    }
}

/// Physical gradient from a reference gradient with the inverse Jacobian.
#[inline]
pub fn to_physical(jinv: &[[f64; 2]; 2], g: [f64; 2]) -> [f64; 2] {
    [
        jinv[0][0] * g[0] + jinv[1][0] * g[1],
        jinv[0][1] * g[0] + jinv[1][1] * g[1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{CellMap, FieldFn};
    use crate::mesh::{unit_square, BoundaryMarker};
    use std::collections::BTreeSet;

    fn pi_at(m: &QuadMesh, p: &PatchInterpolator, u: &FieldFn, c: usize, xi: [f64; 2]) -> f64 {
        let nodal = p.nodal_values(c, &u.values);
        p.eval_ref(c, &nodal, &u.cell_values(m, c), xi).0
    }

    #[test]
    fn constants_and_linears_are_annihilated() {
        let m = unit_square(2, BoundaryMarker::DirichletOuter).refine_global();
        let p = PatchInterpolator::new(&m).unwrap();
        for f in [
            |_: [f64; 2]| 1.0,
            |x: [f64; 2]| x[0] + x[1],
            |x: [f64; 2]| 2.0 * x[0] * x[1],
        ] {
            let u = FieldFn::interpolate(&m, f);
            for c in m.active_cells() {
                for xi in [[0.2, 0.3], [0.9, 0.5]] {
                    assert!(pi_at(&m, &p, &u, c, xi).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn reproduces_quadratic_defect() {
        let m = unit_square(1, BoundaryMarker::DirichletOuter).refine_global();
        let p = PatchInterpolator::new(&m).unwrap();
        let f = |x: [f64; 2]| x[0] * x[0];
        let u = FieldFn::interpolate(&m, f);
        for c in m.active_cells() {
            let map = CellMap::new(m.cell_points(c));
            for xi in [[0.25, 0.25], [0.6, 0.1]] {
                let x = map.map(xi);
                let vals = u.cell_values(&m, c);
                let ih: f64 = shape(xi).iter().zip(&vals).map(|(a, b)| a * b).sum();
                assert!((pi_at(&m, &p, &u, c, xi) - (f(x) - ih)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn level_zero_has_no_patch() {
        let m = unit_square(2, BoundaryMarker::DirichletOuter);
        assert!(matches!(
            PatchInterpolator::new(&m),
            Err(MeshError::NoPatch(_))
        ));
    }

    #[test]
    fn continuous_across_patch_levels() {
        let m = unit_square(2, BoundaryMarker::DirichletOuter).refine_global();
        let corner = m
            .active_cells()
            .find(|&c| m.centroid(c) == [0.125, 0.125])
            .unwrap();
        let m = m.refine(&BTreeSet::from([corner]));
        let p = PatchInterpolator::new(&m).unwrap();
        let u = FieldFn::interpolate(&m, |x| (3.0 * x[0]).sin() + x[1] * x[1] * x[0]);
        // evaluate the interpolant I_2h u = Π u + u along x = 0.5, y in (0, 0.5)
        let value_at = |c: usize, xi: [f64; 2]| {
            let vals = u.cell_values(&m, c);
            let uh: f64 = shape(xi).iter().zip(&vals).map(|(a, b)| a * b).sum();
            pi_at(&m, &p, &u, c, xi) + uh
        };
        let mut checked = 0;
        for k in 1..20 {
            let y = 0.5 * k as f64 / 20.0;
            let (mut left, mut right) = (None, None);
            for c in m.active_cells() {
                let pts = m.cell_points(c);
                let (x0, x1) = (pts[0][0], pts[1][0]);
                let (y0, y1) = (pts[0][1], pts[3][1]);
                if y < y0 || y > y1 {
                    continue;
                }
                let t = (y - y0) / (y1 - y0);
                if (x1 - 0.5).abs() < 1e-14 {
                    left = Some(value_at(c, [1.0, t]));
                }
                if (x0 - 0.5).abs() < 1e-14 {
                    right = Some(value_at(c, [0.0, t]));
                }
            }
            let (l, r) = (left.unwrap(), right.unwrap());
            assert!((l - r).abs() < 1e-13, "y={y}: {l} vs {r}");
            checked += 1;
        }
        assert_eq!(checked, 19);
    }
}
