//! Q1 degrees of freedom on a 1-irregular mesh.

use crate::mesh::{BoundaryMarker, Face, QuadMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexDof {
    /// Not a vertex of any active cell.
    Unused,
    Free(usize),
    /// Homogeneous Dirichlet value, eliminated from the system.
    Dirichlet,
    /// Midpoint of a refined edge whose other side is coarse.
    Hanging {
        masters: [usize; 2],
    },
}

#[derive(Clone, Debug)]
pub struct DofMap {
    status: Vec<VertexDof>,
    free_vertex: Vec<usize>,
    exp_offsets: Vec<usize>,
    exp_entries: Vec<(usize, f64)>,
}

impl DofMap {
    pub fn build(mesh: &QuadMesh, is_dirichlet: impl Fn(BoundaryMarker) -> bool) -> Self {
        let nv = mesh.n_vertices();
        let used = mesh.used_vertices();
        let mut status: Vec<VertexDof> = used
            .iter()
            .map(|&u| {
                if u {
                    VertexDof::Free(0)
                } else {
                    VertexDof::Unused
                }
            })
            .collect();
        for c in mesh.active_cells() {
            let vs = mesh.cell(c).vertices;
            for e in 0..4 {
                match mesh.face(c, e) {
                    Face::Boundary(m) if is_dirichlet(m) => {
                        status[vs[e]] = VertexDof::Dirichlet;
                        status[vs[(e + 1) % 4]] = VertexDof::Dirichlet;
                    }
                    Face::Finer { mid, .. } => {
                        if status[mid] != VertexDof::Dirichlet {
                            status[mid] = VertexDof::Hanging {
                                masters: [vs[e], vs[(e + 1) % 4]],
                            };
                        }
                    }
                    _ => {}
                }
            }
        }
        let mut free_vertex = Vec::new();
        for (v, s) in status.iter_mut().enumerate() {
            if let VertexDof::Free(i) = s {
                *i = free_vertex.len();
                free_vertex.push(v);
            }
        }

        // resolve chains of hanging vertices into free masters
        let mut memo: Vec<Option<Vec<(usize, f64)>>> = vec![None; nv];
        fn resolve(
            v: usize,
            status: &[VertexDof],
            memo: &mut Vec<Option<Vec<(usize, f64)>>>,
        ) -> Vec<(usize, f64)> {
            if let Some(e) = &memo[v] {
                return e.clone();
            }
            let out = match status[v] {
                VertexDof::Free(i) => vec![(i, 1.0)],
                VertexDof::Unused | VertexDof::Dirichlet => Vec::new(),
                VertexDof::Hanging { masters } => {
                    let mut acc: Vec<(usize, f64)> = Vec::new();
                    for m in masters {
                        for (d, w) in resolve(m, status, memo) {
                            match acc.iter_mut().find(|e| e.0 == d) {
                                Some(e) => e.1 += 0.5 * w,
                                None => acc.push((d, 0.5 * w)),
                            }
                        }
                    }
                    acc.sort_by_key(|e| e.0);
                    acc
                }
            };
            memo[v] = Some(out.clone());
            out
        }
        let mut exp_offsets = Vec::with_capacity(nv + 1);
        let mut exp_entries = Vec::new();
        exp_offsets.push(0);
        for v in 0..nv {
            exp_entries.extend(resolve(v, &status, &mut memo));
            exp_offsets.push(exp_entries.len());
        }
        Self {
            status,
            free_vertex,
            exp_offsets,
            exp_entries,
        }
    }

    pub fn n_free(&self) -> usize {
        self.free_vertex.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.status.len()
    }

    pub fn status(&self, v: usize) -> VertexDof {
        self.status[v]
    }

    pub fn free_vertex(&self, i: usize) -> usize {
        self.free_vertex[i]
    }

    pub fn hanging(&self) -> impl Iterator<Item = (usize, [usize; 2])> + '_ {
        self.status.iter().enumerate().filter_map(|(v, s)| match s {
            VertexDof::Hanging { masters } => Some((v, *masters)),
            _ => None,
        })
    }

    /// Free dofs (with weights) that determine the value at vertex `v`.
    pub fn expansion(&self, v: usize) -> &[(usize, f64)] {
        &self.exp_entries[self.exp_offsets[v]..self.exp_offsets[v + 1]]
    }

    /// Vertex values of the finite-element function with free coefficients
    /// `x`.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_free(), "coefficient vector length");
        (0..self.n_vertices())
            .map(|v| self.expansion(v).iter().map(|&(d, w)| w * x[d]).sum())
            .collect()
    }

    /// Free coefficients read off vertex values.
    pub fn restrict(&self, values: &[f64]) -> Vec<f64> {
        self.free_vertex.iter().map(|&v| values[v]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_slit_mesh, unit_square};
    use std::collections::BTreeSet;

    #[test]
    fn one_interior_dof_on_four_cells() {
        let m = unit_square(2, BoundaryMarker::DirichletOuter);
        let d = DofMap::build(&m, |_| true);
        assert_eq!(d.n_free(), 1);
        assert_eq!(m.vertex(d.free_vertex(0)), [0.5, 0.5]);
    }

    #[test]
    fn slit_free_dofs_by_enumeration() {
        // pre-refined n0 = 2: a 4x4 grid with the cut along x = 0.5, y < 0.5.
        // Free vertices are interior ones off the slit (3x3 minus the slit
        // point (0.5, 0.25) and the tip (0.5, 0.5)) plus the top row interior
        // (3 points): 7 + 3 = 10.
        let m = make_slit_mesh(2).unwrap().refine_global();
        let d = DofMap::build(&m, |b| b != BoundaryMarker::SlitTop);
        assert_eq!(d.n_free(), 10);
    }

    #[test]
    fn hanging_vertices_have_two_masters_and_chain() {
        let m = unit_square(2, BoundaryMarker::DirichletOuter);
        let m = m.refine(&BTreeSet::from([0]));
        let corner = m
            .active_cells()
            .find(|&c| m.centroid(c) == [0.375, 0.375])
            .unwrap();
        let m = m.refine(&BTreeSet::from([corner]));
        let d = DofMap::build(&m, |_| false);
        let mut n = 0;
        for (v, masters) in d.hanging() {
            n += 1;
            assert_ne!(masters[0], masters[1]);
            let exp = d.expansion(v);
            assert!((exp.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-15);
            for &(dof, _) in exp {
                assert!(matches!(d.status(d.free_vertex(dof)), VertexDof::Free(_)));
            }
        }
        assert!(n >= 4);
        // expansion reproduces linear functions exactly
        let f = |p: [f64; 2]| 1.0 + 2.0 * p[0] - 3.0 * p[1];
        let x: Vec<f64> = (0..d.n_free())
            .map(|i| f(m.vertex(d.free_vertex(i))))
            .collect();
        let vals = d.expand(&x);
        for (v, val) in vals.iter().enumerate() {
            if d.status(v) != VertexDof::Unused {
                assert!((val - f(m.vertex(v))).abs() < 1e-14);
            }
        }
        // restrict after expand is the identity; expanding twice is idempotent
        assert_eq!(d.restrict(&vals), x);
        assert_eq!(d.expand(&d.restrict(&vals)), vals);
    }
}
