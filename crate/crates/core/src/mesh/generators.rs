//! Coarse meshes for the unit square, the slit domain and the pipette domain.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::quadmesh::{edge_key, BoundaryMarker, Point, QuadMesh, Rect};
use super::MeshError;

/// Glue a list of quadrilaterals into a mesh. Corners with equal `key` become
/// one vertex; every unshared edge is labelled by `classify(a, b)`.
fn glue<K, C>(quads: &[[Point; 4]], key: K, classify: C) -> Result<QuadMesh, MeshError>
where
    K: Fn(Point, Point) -> (i64, i64, u8),
    C: Fn(Point, Point) -> BoundaryMarker,
{
    let mut index: HashMap<(i64, i64, u8), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut cells = Vec::with_capacity(quads.len());
    for q in quads {
        let centroid = [
            0.25 * (q[0][0] + q[1][0] + q[2][0] + q[3][0]),
            0.25 * (q[0][1] + q[1][1] + q[2][1] + q[3][1]),
        ];
        let ids = q.map(|p| {
            *index.entry(key(p, centroid)).or_insert_with(|| {
                vertices.push(p);
                vertices.len() - 1
            })
        });
        cells.push(ids);
    }
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for c in &cells {
        for e in 0..4 {
            *count.entry(edge_key(c[e], c[(e + 1) % 4])).or_default() += 1;
        }
    }
    let mut boundary = HashMap::new();
    for (k, n) in count {
        if n == 1 {
            boundary.insert(k, classify(vertices[k.0], vertices[k.1]));
        }
    }
    QuadMesh::new(vertices, cells, boundary)
}

fn snap(p: Point) -> (i64, i64) {
    ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64)
}

/// Structured quads between node rows: `rows[j][i]` is node `i` on row `j`.
fn quads_between(rows: &[Vec<Point>]) -> Vec<[Point; 4]> {
    let mut out = Vec::new();
    for j in 0..rows.len() - 1 {
        let (lo, hi) = (&rows[j], &rows[j + 1]);
        for i in 0..lo.len() - 1 {
            out.push([lo[i], lo[i + 1], hi[i + 1], hi[i]]);
        }
    }
    out
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// `n × n` cells on the unit square with one marker on the whole boundary.
pub fn unit_square(n: usize, marker: BoundaryMarker) -> QuadMesh {
    let xs = linspace(0.0, 1.0, n);
    let rows: Vec<Vec<Point>> = xs
        .iter()
        .map(|&y| xs.iter().map(|&x| [x, y]).collect())
        .collect();
    glue(
        &quads_between(&rows),
        |p, _| {
            let (a, b) = snap(p);
            (a, b, 0)
        },
        |_, _| marker,
    )
    .expect("unit square is valid")
}

/// Unit square minus the slit `{0.5} × (0, 0.5)` with `n0 × n0` cells.
pub fn make_slit_mesh(n0: usize) -> Result<QuadMesh, MeshError> {
    if n0 < 2 || n0 % 2 != 0 {
        return Err(MeshError::InvalidResolution(n0));
    }
    let xs = linspace(0.0, 1.0, n0);
    let rows: Vec<Vec<Point>> = xs
        .iter()
        .map(|&y| xs.iter().map(|&x| [x, y]).collect())
        .collect();
    let on_slit = |p: Point| (p[0] - 0.5).abs() < 1e-12 && p[1] < 0.5 - 1e-12;
    glue(
        &quads_between(&rows),
        |p, c| {
            let (a, b) = snap(p);
            let side = if on_slit(p) && c[0] > 0.5 { 1 } else { 0 };
            (a, b, side)
        },
        |a, b| {
            let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            if (m[1] - 1.0).abs() < 1e-12 {
                BoundaryMarker::SlitTop
            } else if on_slit(m) {
                BoundaryMarker::SlitRest
            } else {
                BoundaryMarker::DirichletOuter
            }
        },
    )
}

/// Pipette geometry as seen by the mesh generator (lengths in μm).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipetteGeometry {
    pub width: f64,
    pub height: f64,
    pub y_tip: f64,
    /// Inclination of the walls from the vertical, degrees.
    pub theta_deg: f64,
    pub wall: f64,
    pub tip_opening: f64,
    pub observation: Rect,
    /// Target cell size of the coarse mesh.
    pub h: f64,
}

impl Default for PipetteGeometry {
    fn default() -> Self {
        Self {
            width: 40.0,
            height: 60.0,
            y_tip: 20.0,
            theta_deg: 22.0,
            wall: 0.5,
            tip_opening: 1.5,
            observation: Rect {
                x0: 4.0,
                x1: 36.0,
                y0: 10.0,
                y1: 45.0,
            },
            h: 2.0,
        }
    }
}

impl PipetteGeometry {
    pub fn center(&self) -> f64 {
        0.5 * self.width
    }

    /// x-coordinate of the left outer wall surface at height `y ≥ y_tip`.
    pub fn outer_wall_x(&self, y: f64) -> f64 {
        self.center()
            - 0.5 * self.tip_opening
            - self.wall
            - (y - self.y_tip) * self.theta_deg.to_radians().tan()
    }

    /// Area of the excluded wedge (glass plus interior) inside the box.
    pub fn wedge_area(&self) -> f64 {
        let bottom = self.width - 2.0 * self.outer_wall_x(self.y_tip);
        let top = self.width - 2.0 * self.outer_wall_x(self.height);
        0.5 * (bottom + top) * (self.height - self.y_tip)
    }
}

/// Box minus the pipette wedge. The walls are straight mesh lines; the tip
/// opening is a single coarse face.
pub fn make_pipette_mesh(g: &PipetteGeometry) -> Result<QuadMesh, MeshError> {
    if !(g.theta_deg > 0.0 && g.theta_deg < 45.0) {
        return Err(MeshError::Geometry(format!(
            "wall inclination {} deg outside (0, 45)",
            g.theta_deg
        )));
    }
    if !(g.wall > 0.0 && g.tip_opening > 0.0 && g.h > 0.0) {
        return Err(MeshError::Geometry(
            "wall, tip opening and h must be positive".into(),
        ));
    }
    let r = g.observation;
    let xc = g.center();
    let x_tip_outer = g.outer_wall_x(g.y_tip);
    let x_top = g.outer_wall_x(g.height);
    if !(g.y_tip > 0.0 && g.y_tip < g.height) {
        return Err(MeshError::Geometry("tip must lie inside the box".into()));
    }
    if x_top <= 0.0 {
        return Err(MeshError::Geometry(
            "the wedge leaves the box through its sides".into(),
        ));
    }
    let strip = r.x0;
    let y_mid = r.y1;
    let ok = strip > 0.0
        && (r.x1 - (g.width - strip)).abs() < 1e-12
        && r.y0 > 0.0
        && r.y0 < g.y_tip
        && y_mid > g.y_tip
        && y_mid < g.height
        && g.outer_wall_x(y_mid) > strip;
    if !ok {
        return Err(MeshError::Geometry(
            "observation rectangle must be symmetric, contain the tip and stay left of the wall"
                .into(),
        ));
    }

    let count = |len: f64| ((len / g.h).ceil() as usize).max(1);
    let n_strip = count(strip);
    let n_trap = count(x_tip_outer - strip);
    let n_a = count(r.y0);
    let n_b = count(g.y_tip - r.y0);
    let n_c = count(y_mid - g.y_tip);
    let n_d = count(g.height - y_mid);

    // left half node abscissae below the tip, up to the outer wall foot
    let left_nodes = |x_wall: f64| -> Vec<f64> {
        let mut v = linspace(0.0, strip, n_strip);
        v.extend(linspace(strip, x_wall, n_trap).into_iter().skip(1));
        v
    };
    let full_row = |y: f64| -> Vec<Point> {
        let left = left_nodes(x_tip_outer);
        let mut xs = left.clone();
        let inner = xc - 0.5 * g.tip_opening;
        xs.push(inner);
        xs.push(2.0 * xc - inner);
        xs.extend(left.iter().rev().map(|&x| g.width - x));
        xs.into_iter().map(|x| [x, y]).collect()
    };
    let mut quads = Vec::new();
    let below: Vec<Vec<Point>> = linspace(0.0, r.y0, n_a)
        .into_iter()
        .chain(linspace(r.y0, g.y_tip, n_b).into_iter().skip(1))
        .map(full_row)
        .collect();
    quads.extend(quads_between(&below));

    let mut left_rows: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<f64> = linspace(g.y_tip, y_mid, n_c);
    for &y in &ys {
        left_rows.push(left_nodes(g.outer_wall_x(y)));
    }
    let base = left_nodes(g.outer_wall_x(y_mid));
    let scale_ref = g.outer_wall_x(y_mid);
    for y in linspace(y_mid, g.height, n_d).into_iter().skip(1) {
        let s = g.outer_wall_x(y) / scale_ref;
        left_rows.push(base.iter().map(|&x| x * s).collect());
        ys.push(y);
    }
    let left: Vec<Vec<Point>> = left_rows
        .iter()
        .zip(&ys)
        .map(|(xs, &y)| xs.iter().map(|&x| [x, y]).collect())
        .collect();
    quads.extend(quads_between(&left));
    let right: Vec<Vec<Point>> = left
        .iter()
        .map(|row| row.iter().rev().map(|p| [g.width - p[0], p[1]]).collect())
        .collect();
    quads.extend(quads_between(&right));

    let tip_lo = xc - 0.5 * g.tip_opening;
    let tip_hi = xc + 0.5 * g.tip_opening;
    let eps = 1e-9;
    let mesh = glue(
        &quads,
        |p, _| {
            let (a, b) = snap(p);
            (a, b, 0)
        },
        |a, b| {
            let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let on_box = m[0] < eps || m[0] > g.width - eps || m[1] < eps || m[1] > g.height - eps;
            if on_box {
                BoundaryMarker::DirichletOuter
            } else if (m[1] - g.y_tip).abs() < eps && m[0] > tip_lo && m[0] < tip_hi {
                BoundaryMarker::PipTip
            } else {
                BoundaryMarker::PipWall
            }
        },
    )?;
    Ok(mesh.with_observation(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn duplicated_pairs(m: &QuadMesh) -> usize {
        let vs = m.vertices();
        let mut n = 0;
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                if vs[i] == vs[j] {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn slit_counts_by_hand() {
        let m = make_slit_mesh(2).unwrap();
        assert_eq!(m.n_active(), 4);
        assert_eq!(m.n_vertices(), 10);
        assert_eq!(duplicated_pairs(&m), 1);
        let m4 = make_slit_mesh(4).unwrap();
        assert_eq!(m4.n_active(), 16);
        assert_eq!(duplicated_pairs(&m4), 2);
        assert!(matches!(
            make_slit_mesh(3),
            Err(MeshError::InvalidResolution(3))
        ));
        assert!(matches!(
            make_slit_mesh(0),
            Err(MeshError::InvalidResolution(0))
        ));
    }

    #[test]
    fn slit_markers() {
        let m = make_slit_mesh(4).unwrap();
        let mut top = 0.0;
        let mut slit = 0.0;
        for c in m.active_cells() {
            let vs = m.cell(c).vertices;
            for e in 0..4 {
                let (a, b) = (vs[e], vs[(e + 1) % 4]);
                let len = {
                    let (p, q) = (m.vertex(a), m.vertex(b));
                    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
                };
                match m.boundary_marker(a, b) {
                    Some(BoundaryMarker::SlitTop) => top += len,
                    Some(BoundaryMarker::SlitRest) => slit += len,
                    _ => {}
                }
            }
        }
        assert!((top - 1.0).abs() < 1e-14);
        // both faces of the slit
        assert!((slit - 1.0).abs() < 1e-14);
    }

    #[test]
    fn slit_refinement_keeps_the_cut_open() {
        let m = make_slit_mesh(2).unwrap().refine_global().refine_global();
        assert_eq!(m.n_active(), 64);
        // (n+1)^2 + n/2 duplicated points for n = 8
        assert_eq!(m.used_vertices().iter().filter(|&&u| u).count(), 81 + 4);
    }

    #[test]
    fn pipette_area_matches_shoelace() {
        let g = PipetteGeometry::default();
        let m = make_pipette_mesh(&g).unwrap();
        // shoelace on the wedge polygon
        let poly = [
            [g.outer_wall_x(g.y_tip), g.y_tip],
            [g.width - g.outer_wall_x(g.y_tip), g.y_tip],
            [g.width - g.outer_wall_x(g.height), g.height],
            [g.outer_wall_x(g.height), g.height],
        ];
        let mut wedge = 0.0;
        for i in 0..4 {
            let j = (i + 1) % 4;
            wedge += 0.5 * (poly[i][0] * poly[j][1] - poly[j][0] * poly[i][1]);
        }
        let expected = g.width * g.height - wedge;
        assert!((m.active_area() - expected).abs() <= 0.01 * expected);
        assert!((wedge - g.wedge_area()).abs() < 1e-9);
    }

    #[test]
    fn pipette_tip_faces_span_the_opening() {
        let g = PipetteGeometry::default();
        let m = make_pipette_mesh(&g).unwrap().refine_global();
        let mut tip = 0.0;
        let mut wall = 0.0;
        for c in m.active_cells() {
            let vs = m.cell(c).vertices;
            for e in 0..4 {
                let (p, q) = (m.vertex(vs[e]), m.vertex(vs[(e + 1) % 4]));
                let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                match m.boundary_marker(vs[e], vs[(e + 1) % 4]) {
                    Some(BoundaryMarker::PipTip) => tip += len,
                    Some(BoundaryMarker::PipWall) => wall += len,
                    _ => {}
                }
            }
        }
        assert!((tip - 1.5).abs() < 1e-12);
        let slant = (g.height - g.y_tip) / g.theta_deg.to_radians().cos();
        assert!((wall - (2.0 * slant + 2.0 * g.wall)).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cone_is_rejected() {
        let g = PipetteGeometry {
            theta_deg: 0.0,
            ..Default::default()
        };
        assert!(matches!(make_pipette_mesh(&g), Err(MeshError::Geometry(_))));
    }

    #[test]
    fn observation_cells_cover_the_rectangle() {
        let g = PipetteGeometry::default();
        let m = make_pipette_mesh(&g).unwrap();
        let area: f64 = m
            .active_cells()
            .filter(|&c| m.in_observation(c))
            .map(|c| m.signed_area(c))
            .sum();
        // rectangle minus the part of the wedge below y1
        let r = g.observation;
        let x_top = g.outer_wall_x(r.y1);
        let wedge = 0.5
            * ((g.width - 2.0 * g.outer_wall_x(g.y_tip)) + (g.width - 2.0 * x_top))
            * (r.y1 - g.y_tip);
        let expected = (r.x1 - r.x0) * (r.y1 - r.y0) - wedge;
        assert!((area - expected).abs() < 1e-9);
    }
}
