//! Bilinear (Q1) reference element on `[0, 1]²` and its isoparametric map.
//!
//! Local node order: (0,0), (1,0), (1,1), (0,1), matching the
//! counterclockwise cell vertex order.

use crate::mesh::Point;

#[inline]
pub fn shape(xi: [f64; 2]) -> [f64; 4] {
    let [s, t] = xi;
    [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t]
}

#[inline]
pub fn shape_grad_ref(xi: [f64; 2]) -> [[f64; 2]; 4] {
    let [s, t] = xi;
    [
        [-(1.0 - t), -(1.0 - s)],
        [1.0 - t, -s],
        [t, s],
        [-t, 1.0 - s],
    ]
}

/// Geometry of one quadrature point of a mapped cell.
#[derive(Clone, Copy, Debug)]
pub struct MappedPoint {
    pub x: Point,
    pub det: f64,
    /// Columns are ∂x/∂ξ and ∂x/∂η.
    pub jac: [[f64; 2]; 2],
    pub jinv: [[f64; 2]; 2],
    pub phi: [f64; 4],
    pub grad: [[f64; 2]; 4],
}

#[derive(Clone, Copy, Debug)]
pub struct CellMap {
    pub p: [Point; 4],
}

impl CellMap {
    pub fn new(p: [Point; 4]) -> Self {
        Self { p }
    }

    pub fn map(&self, xi: [f64; 2]) -> Point {
        let n = shape(xi);
        let mut x = [0.0; 2];
        for i in 0..4 {
            x[0] += n[i] * self.p[i][0];
            x[1] += n[i] * self.p[i][1];
        }
        x
    }

    pub fn jacobian(&self, xi: [f64; 2]) -> [[f64; 2]; 2] {
        let g = shape_grad_ref(xi);
        let mut j = [[0.0; 2]; 2];
        for i in 0..4 {
            for r in 0..2 {
                for c in 0..2 {
                    j[r][c] += self.p[i][r] * g[i][c];
                }
            }
        }
        j
    }

    /// Mixed second derivative ∂²x/∂ξ∂η (constant on the cell).
    pub fn twist(&self) -> [f64; 2] {
        let p = &self.p;
        [
            p[0][0] - p[1][0] + p[2][0] - p[3][0],
            p[0][1] - p[1][1] + p[2][1] - p[3][1],
        ]
    }

    /// True when the map is affine (the cell is a parallelogram).
    pub fn is_affine(&self) -> bool {
        let a = self.twist();
        let scale = (self.p[1][0] - self.p[0][0]).abs()
            + (self.p[1][1] - self.p[0][1]).abs()
            + (self.p[3][0] - self.p[0][0]).abs()
            + (self.p[3][1] - self.p[0][1]).abs();
        a[0].abs() + a[1].abs() <= 1e-13 * scale
    }

    pub fn at(&self, xi: [f64; 2]) -> MappedPoint {
        let jac = self.jacobian(xi);
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let jinv = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        let gr = shape_grad_ref(xi);
        let mut grad = [[0.0; 2]; 4];
        for i in 0..4 {
            // ∇φ = J^{-T} ∇_ξ φ
            grad[i][0] = jinv[0][0] * gr[i][0] + jinv[1][0] * gr[i][1];
            grad[i][1] = jinv[0][1] * gr[i][0] + jinv[1][1] * gr[i][1];
        }
        MappedPoint {
            x: self.map(xi),
            det,
            jac,
            jinv,
            phi: shape(xi),
            grad,
        }
    }

    /// Physical Laplacian of the Q1 field with nodal values `v` at `xi`.
    pub fn laplacian(&self, v: &[f64; 4], mp: &MappedPoint) -> f64 {
        let a = self.twist();
        let c = v[0] - v[1] + v[2] - v[3];
        let g = value_grad(v, mp).1;
        let e = c - (g[0] * a[0] + g[1] * a[1]);
        // G = J^{-1} J^{-T}, only the off-diagonal entry enters
        let ji = mp.jinv;
        let g12 = ji[0][0] * ji[1][0] + ji[0][1] * ji[1][1];
        2.0 * e * g12
    }
}

/// Value and physical gradient of a Q1 field at a mapped point.
#[inline]
pub fn value_grad(v: &[f64; 4], mp: &MappedPoint) -> (f64, [f64; 2]) {
    let mut val = 0.0;
    let mut g = [0.0; 2];
    for i in 0..4 {
        val += v[i] * mp.phi[i];
        g[0] += v[i] * mp.grad[i][0];
        g[1] += v[i] * mp.grad[i][1];
    }
    (val, g)
}

/// Outward unit normal and length of the straight edge from `a` to `b` of a
/// counterclockwise cell.
pub fn edge_normal(a: Point, b: Point) -> ([f64; 2], f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    ([d[1] / len, -d[0] / len], len)
}

/// Reference coordinates of the point at parameter `t` along local edge `e`.
pub fn edge_ref_point(e: usize, t: f64) -> [f64; 2] {
    match e {
        0 => [t, 0.0],
        1 => [1.0, t],
        2 => [1.0 - t, 1.0],
        _ => [0.0, 1.0 - t],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::QuadratureRule;

    fn trapezoid() -> CellMap {
        CellMap::new([[0.0, 0.0], [2.0, 0.2], [1.7, 1.4], [0.1, 1.0]])
    }

    #[test]
    fn partition_of_unity() {
        let q = QuadratureRule::tensor(4);
        let m = trapezoid();
        for &xi in &q.points {
            let mp = m.at(xi);
            assert!((mp.phi.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let gs: [f64; 2] = [
                mp.grad.iter().map(|g| g[0]).sum(),
                mp.grad.iter().map(|g| g[1]).sum(),
            ];
            assert!(gs[0].abs() < 1e-13 && gs[1].abs() < 1e-13);
        }
    }

    #[test]
    fn area_from_determinant() {
        let m = trapezoid();
        let q = QuadratureRule::tensor(2);
        let area: f64 = q
            .points
            .iter()
            .zip(&q.weights)
            .map(|(&xi, w)| w * m.at(xi).det)
            .sum();
        let p = m.p;
        let mut shoelace = 0.0;
        for i in 0..4 {
            let j = (i + 1) % 4;
            shoelace += 0.5 * (p[i][0] * p[j][1] - p[j][0] * p[i][1]);
        }
        assert!((area - shoelace).abs() < 1e-14);
    }

    #[test]
    fn linear_fields_are_reproduced_and_harmonic() {
        let m = trapezoid();
        let f = |x: Point| 0.3 + 2.0 * x[0] - 1.5 * x[1];
        let v = m.p.map(f);
        let mp = m.at([0.3, 0.6]);
        let (val, g) = value_grad(&v, &mp);
        assert!((val - f(mp.x)).abs() < 1e-14);
        assert!((g[0] - 2.0).abs() < 1e-13 && (g[1] + 1.5).abs() < 1e-13);
        assert!(m.laplacian(&v, &mp).abs() < 1e-12);
    }

    /// Inverse map by Newton's method.
    fn inverse(m: &CellMap, x: Point) -> [f64; 2] {
        let mut xi = [0.5, 0.5];
        for _ in 0..50 {
            let r = m.map(xi);
            let mp = m.at(xi);
            let d = [x[0] - r[0], x[1] - r[1]];
            xi[0] += mp.jinv[0][0] * d[0] + mp.jinv[0][1] * d[1];
            xi[1] += mp.jinv[1][0] * d[0] + mp.jinv[1][1] * d[1];
        }
        xi
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        let m = trapezoid();
        let v = [0.4, -1.0, 2.5, 0.7];
        let field = |x: Point| {
            let mp = m.at(inverse(&m, x));
            value_grad(&v, &mp).0
        };
        let x0 = m.map([0.4, 0.55]);
        let h = 1e-4;
        let fd = (field([x0[0] + h, x0[1]])
            + field([x0[0] - h, x0[1]])
            + field([x0[0], x0[1] + h])
            + field([x0[0], x0[1] - h])
            - 4.0 * field(x0))
            / (h * h);
        let exact = m.laplacian(&v, &m.at([0.4, 0.55]));
        assert!(
            (fd - exact).abs() < 1e-5 * (1.0 + exact.abs()),
            "{fd} vs {exact}"
        );
        assert!(exact.abs() > 1e-3);
    }

    #[test]
    fn normals_point_outward() {
        let (n, len) = edge_normal([0.0, 0.0], [2.0, 0.0]);
        assert_eq!(n, [0.0, -1.0]);
        assert_eq!(len, 2.0);
        assert_eq!(edge_ref_point(2, 0.25), [0.75, 1.0]);
    }
}
