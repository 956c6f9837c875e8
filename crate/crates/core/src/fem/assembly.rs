//! Scatter of cell contributions into constrained global systems.

use crate::linalg::SparseMatrix;
use crate::mesh::QuadMesh;

use super::dofmap::DofMap;
use super::element::{value_grad, CellMap};
use super::field::FieldFn;
use super::quadrature::QuadratureRule;

/// Triplet accumulator for a block system. Rows and columns are free dofs
/// of the given dof maps shifted by block offsets.
#[derive(Default)]
pub struct Triplets {
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        self.entries.push((r, c, v));
    }

    /// Add a local 4×4 cell matrix (rows: test functions of `rows` map,
    /// columns: trial functions of `cols` map).
    pub fn add_local(
        &mut self,
        dm: &DofMap,
        verts: &[usize; 4],
        local: &[[f64; 4]; 4],
        row_off: usize,
        col_off: usize,
    ) {
        for i in 0..4 {
            let ei = dm.expansion(verts[i]);
            if ei.is_empty() {
                continue;
            }
            for j in 0..4 {
                let v = local[i][j];
                if v == 0.0 {
                    continue;
                }
                for &(dj, wj) in dm.expansion(verts[j]) {
                    for &(di, wi) in ei {
                        self.entries.push((row_off + di, col_off + dj, wi * wj * v));
                    }
                }
            }
        }
    }

    pub fn into_matrix(self, n: usize) -> SparseMatrix<f64> {
        SparseMatrix::from_triplets(n, n, &self.entries).expect("assembled indices are in range")
    }
}

/// Add a local load vector (one entry per cell vertex) into `out[off..]`.
pub fn add_local_vector(
    out: &mut [f64],
    dm: &DofMap,
    verts: &[usize; 4],
    local: &[f64; 4],
    off: usize,
) {
    for i in 0..4 {
        for &(d, w) in dm.expansion(verts[i]) {
            out[off + d] += w * local[i];
        }
    }
}

/// `(σ ∇φ_j, ∇φ_i)` over all active cells.
pub fn stiffness_matrix(
    mesh: &QuadMesh,
    dm: &DofMap,
    sigma: f64,
    quad: &QuadratureRule,
) -> SparseMatrix<f64> {
    let mut t = Triplets::new();
    for c in mesh.active_cells() {
        let map = CellMap::new(mesh.cell_points(c));
        let mut k = [[0.0; 4]; 4];
        for (&xi, &w) in quad.points.iter().zip(&quad.weights) {
            let mp = map.at(xi);
            let dx = w * mp.det * sigma;
            for i in 0..4 {
                for j in 0..4 {
                    k[i][j] += dx * (mp.grad[i][0] * mp.grad[j][0] + mp.grad[i][1] * mp.grad[j][1]);
                }
            }
        }
        t.add_local(dm, &mesh.cell(c).vertices, &k, 0, 0);
    }
    t.into_matrix(dm.n_free())
}

/// Weighted mass matrix `(ω φ_j, φ_i)` with a per-cell weight.
pub fn mass_matrix(
    mesh: &QuadMesh,
    dm: &DofMap,
    weight: impl Fn(usize) -> f64,
    quad: &QuadratureRule,
) -> SparseMatrix<f64> {
    let mut t = Triplets::new();
    for c in mesh.active_cells() {
        let om = weight(c);
        if om == 0.0 {
            continue;
        }
        let map = CellMap::new(mesh.cell_points(c));
        let mut k = [[0.0; 4]; 4];
        for (&xi, &w) in quad.points.iter().zip(&quad.weights) {
            let mp = map.at(xi);
            let dx = w * mp.det * om;
            for i in 0..4 {
                for j in 0..4 {
                    k[i][j] += dx * mp.phi[i] * mp.phi[j];
                }
            }
        }
        t.add_local(dm, &mesh.cell(c).vertices, &k, 0, 0);
    }
    t.into_matrix(dm.n_free())
}

/// `(f, φ_i)` over all active cells.
pub fn load_vector(
    mesh: &QuadMesh,
    dm: &DofMap,
    f: impl Fn([f64; 2]) -> f64,
    quad: &QuadratureRule,
) -> Vec<f64> {
    let mut out = vec![0.0; dm.n_free()];
    for c in mesh.active_cells() {
        let map = CellMap::new(mesh.cell_points(c));
        let mut l = [0.0; 4];
        for (&xi, &w) in quad.points.iter().zip(&quad.weights) {
            let mp = map.at(xi);
            let fx = w * mp.det * f(mp.x);
            for i in 0..4 {
                l[i] += fx * mp.phi[i];
            }
        }
        add_local_vector(&mut out, dm, &mesh.cell(c).vertices, &l, 0);
    }
    out
}

/// L2 and H1-seminorm errors of `u` against an exact solution.
pub fn errors(
    mesh: &QuadMesh,
    u: &FieldFn,
    exact: impl Fn([f64; 2]) -> f64,
    exact_grad: impl Fn([f64; 2]) -> [f64; 2],
    quad: &QuadratureRule,
) -> (f64, f64) {
    let (mut l2, mut h1) = (0.0, 0.0);
    for c in mesh.active_cells() {
        let map = CellMap::new(mesh.cell_points(c));
        let vals = u.cell_values(mesh, c);
        for (&xi, &w) in quad.points.iter().zip(&quad.weights) {
            let mp = map.at(xi);
            let (v, g) = value_grad(&vals, &mp);
            let ge = exact_grad(mp.x);
            l2 += w * mp.det * (v - exact(mp.x)).powi(2);
            h1 += w * mp.det * ((g[0] - ge[0]).powi(2) + (g[1] - ge[1]).powi(2));
        }
    }
    (l2.sqrt(), h1.sqrt())
}
