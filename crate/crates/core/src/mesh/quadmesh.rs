use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::MeshError;

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryMarker {
    DirichletOuter,
    PipTip,
    PipWall,
    SlitTop,
    SlitRest,
}

/// Sorted vertex pair identifying an edge.
pub type EdgeKey = (usize, usize);

#[inline]
pub fn edge_key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    /// Counterclockwise.
    pub vertices: [usize; 4],
    pub level: u8,
    pub parent: Option<usize>,
    pub children: Option<[usize; 4]>,
}

/// How a vertex came into existence; used to interpolate fields onto a
/// refined mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VertexOrigin {
    Initial,
    EdgeMidpoint([usize; 2]),
    CellCenter([usize; 4]),
}

/// What lies across one edge of an active cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Face {
    Boundary(BoundaryMarker),
    /// An active neighbor of the same level.
    Same(usize),
    /// The edge is half of the edge `parent_edge` of the active coarse
    /// neighbor `cell`.
    Coarser {
        cell: usize,
        parent_edge: EdgeKey,
    },
    /// The edge is split at `mid`; the two finer neighbors are listed in edge
    /// order (the first touches the edge's start vertex).
    Finer {
        cells: [usize; 2],
        mid: usize,
    },
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }
}

#[derive(Clone, Debug)]
pub struct QuadMesh {
    vertices: Vec<Point>,
    origins: Vec<VertexOrigin>,
    cells: Vec<Cell>,
    active: Vec<bool>,
    n_active: usize,
    edge_mid: HashMap<EdgeKey, usize>,
    half_parent: HashMap<EdgeKey, EdgeKey>,
    edge_cells: HashMap<EdgeKey, [usize; 2]>,
    boundary: HashMap<EdgeKey, BoundaryMarker>,
    observation: Option<Rect>,
}

const NO_CELL: usize = usize::MAX;

impl QuadMesh {
    /// Build a level-0 mesh. Every edge used by exactly one cell must carry a
    /// marker in `boundary`.
    pub fn new(
        vertices: Vec<Point>,
        cells: Vec<[usize; 4]>,
        boundary: HashMap<EdgeKey, BoundaryMarker>,
    ) -> Result<Self, MeshError> {
        let n = cells.len();
        let mut mesh = Self {
            origins: vec![VertexOrigin::Initial; vertices.len()],
            vertices,
            cells: Vec::with_capacity(n),
            active: vec![true; n],
            n_active: n,
            edge_mid: HashMap::new(),
            half_parent: HashMap::new(),
            edge_cells: HashMap::new(),
            boundary,
            observation: None,
        };
        for (id, vs) in cells.into_iter().enumerate() {
            if vs.iter().any(|&v| v >= mesh.vertices.len()) {
                return Err(MeshError::Geometry(format!(
                    "cell {id} references a missing vertex"
                )));
            }
            mesh.cells.push(Cell {
                vertices: vs,
                level: 0,
                parent: None,
                children: None,
            });
            if mesh.signed_area(id) <= 0.0 {
                return Err(MeshError::Geometry(format!(
                    "cell {id} is not positively oriented"
                )));
            }
            for e in 0..4 {
                mesh.register_edge(vs[e], vs[(e + 1) % 4], id)?;
            }
        }
        for (&k, cs) in &mesh.edge_cells {
            let outer = cs[1] == NO_CELL;
            if outer != mesh.boundary.contains_key(&k) {
                return Err(MeshError::Geometry(format!(
                    "edge {k:?} boundary marker does not match its cell count"
                )));
            }
        }
        Ok(mesh)
    }

    pub fn with_observation(mut self, r: Rect) -> Self {
        self.observation = Some(r);
        self
    }

    fn register_edge(&mut self, a: usize, b: usize, cell: usize) -> Result<(), MeshError> {
        let slot = self
            .edge_cells
            .entry(edge_key(a, b))
            .or_insert([NO_CELL, NO_CELL]);
        if slot[0] == NO_CELL {
            slot[0] = cell;
        } else if slot[1] == NO_CELL {
            slot[1] = cell;
        } else {
            return Err(MeshError::Geometry(format!(
                "edge ({a}, {b}) shared by more than two cells"
            )));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn origin(&self, v: usize) -> VertexOrigin {
        self.origins[v]
    }

    pub fn cell(&self, c: usize) -> &Cell {
        &self.cells[c]
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn is_active(&self, c: usize) -> bool {
        self.active[c]
    }

    pub fn n_active(&self) -> usize {
        self.n_active
    }

    /// Active cell ids in increasing order.
    pub fn active_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells.len()).filter(move |&c| self.active[c])
    }

    /// Vertices referenced by at least one active cell.
    pub fn used_vertices(&self) -> Vec<bool> {
        let mut used = vec![false; self.vertices.len()];
        for c in self.active_cells() {
            for &v in &self.cells[c].vertices {
                used[v] = true;
            }
        }
        used
    }

    pub fn boundary_marker(&self, a: usize, b: usize) -> Option<BoundaryMarker> {
        self.boundary.get(&edge_key(a, b)).copied()
    }

    pub fn edge_midpoint(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_mid.get(&edge_key(a, b)).copied()
    }

    /// The longer edge that `(a, b)` is one half of, if any.
    pub fn parent_edge(&self, a: usize, b: usize) -> Option<EdgeKey> {
        self.half_parent.get(&edge_key(a, b)).copied()
    }

    pub fn observation(&self) -> Option<Rect> {
        self.observation
    }

    pub fn cell_points(&self, c: usize) -> [Point; 4] {
        self.cells[c].vertices.map(|v| self.vertices[v])
    }

    pub fn centroid(&self, c: usize) -> Point {
        let p = self.cell_points(c);
        [
            0.25 * (p[0][0] + p[1][0] + p[2][0] + p[3][0]),
            0.25 * (p[0][1] + p[1][1] + p[2][1] + p[3][1]),
        ]
    }

    /// Whether the cell lies in the observation sub-domain (the whole domain
    /// when none is recorded).
    pub fn in_observation(&self, c: usize) -> bool {
        self.observation
            .map_or(true, |r| r.contains(self.centroid(c)))
    }

    pub fn signed_area(&self, c: usize) -> f64 {
        let p = self.cell_points(c);
        let mut a = 0.0;
        for i in 0..4 {
            let j = (i + 1) % 4;
            a += p[i][0] * p[j][1] - p[j][0] * p[i][1];
        }
        0.5 * a
    }

    pub fn active_area(&self) -> f64 {
        self.active_cells().map(|c| self.signed_area(c)).sum()
    }

    pub fn max_level(&self) -> u8 {
        self.active_cells()
            .map(|c| self.cells[c].level)
            .max()
            .unwrap_or(0)
    }

    /// Largest edge length over active cells.
    pub fn h_max(&self) -> f64 {
        let mut h: f64 = 0.0;
        for c in self.active_cells() {
            let p = self.cell_points(c);
            for i in 0..4 {
                let j = (i + 1) % 4;
                h = h.max(((p[j][0] - p[i][0]).powi(2) + (p[j][1] - p[i][1]).powi(2)).sqrt());
            }
        }
        h
    }

    /// The four children of the parent of `c` (including `c`).
    pub fn patch_parent(&self, c: usize) -> Result<(usize, [usize; 4]), MeshError> {
        let parent = self.cells[c].parent.ok_or(MeshError::NoPatch(c))?;
        let kids = self.cells[parent].children.expect("parent has children");
        Ok((parent, kids))
    }

    fn other_cell(&self, key: EdgeKey, not: usize) -> Option<usize> {
        let cs = self.edge_cells.get(&key)?;
        if cs[0] == not {
            (cs[1] != NO_CELL).then_some(cs[1])
        } else {
            Some(cs[0])
        }
    }

    /// Face classification of local edge `e` (from vertex `e` to `e+1`) of an
    /// active cell.
    pub fn face(&self, c: usize, e: usize) -> Face {
        let vs = self.cells[c].vertices;
        let (a, b) = (vs[e], vs[(e + 1) % 4]);
        let key = edge_key(a, b);
        if let Some(m) = self.boundary.get(&key) {
            return Face::Boundary(*m);
        }
        if let Some(&mid) = self.edge_mid.get(&key) {
            let first = self
                .active_owner(edge_key(a, mid))
                .expect("finer neighbor on first half");
            let second = self
                .active_owner(edge_key(mid, b))
                .expect("finer neighbor on second half");
            return Face::Finer {
                cells: [first, second],
                mid,
            };
        }
        if let Some(n) = self.other_cell(key, c) {
            return Face::Same(n);
        }
        let parent_edge = *self
            .half_parent
            .get(&key)
            .expect("interior edge without neighbor must be half of a coarse edge");
        let own_parent = self.cells[c]
            .parent
            .expect("half edges only exist on children");
        let cell = self
            .other_cell(parent_edge, own_parent)
            .expect("coarse neighbor exists");
        Face::Coarser { cell, parent_edge }
    }

    /// Among the cells registered on `key`, the active one.
    fn active_owner(&self, key: EdgeKey) -> Option<usize> {
        let cs = self.edge_cells.get(&key)?;
        cs.iter().copied().find(|&x| x != NO_CELL && self.active[x])
    }

    pub fn faces(&self, c: usize) -> [Face; 4] {
        [0, 1, 2, 3].map(|e| self.face(c, e))
    }

    /// No active edge carries more than one hanging vertex and neighbor
    /// levels differ by at most one.
    pub fn is_one_irregular(&self) -> bool {
        for c in self.active_cells() {
            let lc = self.cells[c].level as i32;
            for e in 0..4 {
                let vs = self.cells[c].vertices;
                let (a, b) = (vs[e], vs[(e + 1) % 4]);
                if let Some(&m) = self.edge_mid.get(&edge_key(a, b)) {
                    if self.edge_mid.contains_key(&edge_key(a, m))
                        || self.edge_mid.contains_key(&edge_key(m, b))
                    {
                        return false;
                    }
                }
                match self.face(c, e) {
                    Face::Same(n) | Face::Coarser { cell: n, .. } => {
                        if !self.active[n] || (self.cells[n].level as i32 - lc).abs() > 1 {
                            return false;
                        }
                    }
                    Face::Finer { cells, .. } => {
                        if cells.iter().any(|&n| self.cells[n].level as i32 - lc != 1) {
                            return false;
                        }
                    }
                    Face::Boundary(_) => {}
                }
            }
        }
        true
    }

    pub fn refine_global(&self) -> QuadMesh {
        let all: BTreeSet<usize> = self.active_cells().collect();
        self.refine(&all)
    }

    /// Refine the marked active cells plus the closure needed to keep the mesh
    /// 1-irregular with complete active sibling groups.
    pub fn refine(&self, marks: &BTreeSet<usize>) -> QuadMesh {
        let mut chosen = vec![false; self.cells.len()];
        let mut work: Vec<usize> = Vec::new();
        for &c in marks {
            if c < self.cells.len() && self.active[c] && !chosen[c] {
                chosen[c] = true;
                work.push(c);
            }
        }
        while let Some(c) = work.pop() {
            if let Ok((_, kids)) = self.patch_parent(c) {
                for k in kids {
                    if self.active[k] && !chosen[k] {
                        chosen[k] = true;
                        work.push(k);
                    }
                }
            }
            for e in 0..4 {
                if let Face::Coarser { cell, .. } = self.face(c, e) {
                    if !chosen[cell] {
                        chosen[cell] = true;
                        work.push(cell);
                    }
                }
            }
        }
        let mut out = self.clone();
        for c in 0..self.cells.len() {
            if chosen[c] {
                out.split(c);
            }
        }
        out
    }

    fn midpoint_vertex(&mut self, a: usize, b: usize) -> usize {
        let key = edge_key(a, b);
        if let Some(&m) = self.edge_mid.get(&key) {
            return m;
        }
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let m = self.vertices.len();
        self.vertices
            .push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        self.origins
            .push(VertexOrigin::EdgeMidpoint([key.0, key.1]));
        self.edge_mid.insert(key, m);
        for half in [edge_key(a, m), edge_key(m, b)] {
            self.half_parent.insert(half, key);
            if let Some(&mk) = self.boundary.get(&key) {
                self.boundary.insert(half, mk);
            }
        }
        m
    }

    fn split(&mut self, c: usize) {
        let [v0, v1, v2, v3] = self.cells[c].vertices;
        let m01 = self.midpoint_vertex(v0, v1);
        let m12 = self.midpoint_vertex(v1, v2);
        let m23 = self.midpoint_vertex(v2, v3);
        let m30 = self.midpoint_vertex(v3, v0);
        let p = self.cell_points(c);
        let center = self.vertices.len();
        self.vertices.push([
            0.25 * (p[0][0] + p[1][0] + p[2][0] + p[3][0]),
            0.25 * (p[0][1] + p[1][1] + p[2][1] + p[3][1]),
        ]);
        self.origins
            .push(VertexOrigin::CellCenter([v0, v1, v2, v3]));
        let level = self.cells[c].level + 1;
        let base = self.cells.len();
        let quads = [
            [v0, m01, center, m30],
            [m01, v1, m12, center],
            [center, m12, v2, m23],
            [m30, center, m23, v3],
        ];
        for (i, vs) in quads.into_iter().enumerate() {
            self.cells.push(Cell {
                vertices: vs,
                level,
                parent: Some(c),
                children: None,
            });
            self.active.push(true);
            for e in 0..4 {
                self.register_edge(vs[e], vs[(e + 1) % 4], base + i)
                    .expect("refinement keeps edges manifold");
            }
        }
        self.cells[c].children = Some([base, base + 1, base + 2, base + 3]);
        self.active[c] = false;
        self.n_active += 3;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generators::unit_square;

    #[test]
    fn empty_marks_keep_active_set() {
        let m = unit_square(2, BoundaryMarker::DirichletOuter);
        let r = m.refine(&BTreeSet::new());
        assert_eq!(
            r.active_cells().collect::<Vec<_>>(),
            m.active_cells().collect::<Vec<_>>()
        );
    }

    #[test]
    fn global_refinement_quadruples_and_raises_levels() {
        let m = unit_square(2, BoundaryMarker::DirichletOuter);
        let r = m.refine_global();
        assert_eq!(r.n_active(), 16);
        assert!(r.active_cells().all(|c| r.cell(c).level == 1));
        assert!((r.active_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corner_refined_twice_forces_neighbors_once() {
        let m = unit_square(2, BoundaryMarker::DirichletOuter);
        let m1 = m.refine(&BTreeSet::from([0]));
        assert_eq!(m1.n_active(), 7);
        let corner = m1
            .active_cells()
            .find(|&c| m1.centroid(c) == [0.125, 0.125])
            .unwrap();
        let m2 = m1.refine(&BTreeSet::from([corner]));
        assert!(m2.is_one_irregular());
        let level_at = |p: Point| {
            m2.active_cells()
                .filter(|&c| m2.cell(c).vertices.iter().any(|&v| m2.vertex(v) == p))
                .map(|c| m2.cell(c).level)
                .max()
                .unwrap()
        };
        // the corner patch goes to level 2, the two edge neighbours are
        // forced to level 1 once, the opposite corner stays untouched
        assert_eq!(level_at([0.0, 0.0]), 2);
        assert_eq!(level_at([1.0, 0.0]), 1);
        assert_eq!(level_at([0.0, 1.0]), 1);
        assert_eq!(level_at([1.0, 1.0]), 0);
        assert_eq!(m2.n_active(), 16 + 4 + 4 + 1);
        assert!(m2.is_active(3));
        assert!((m2.active_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn patches_exist_after_two_global_refinements() {
        let m = unit_square(2, BoundaryMarker::DirichletOuter);
        assert!(matches!(m.patch_parent(0), Err(MeshError::NoPatch(0))));
        let r = m.refine_global().refine_global();
        for c in r.active_cells() {
            let (_, kids) = r.patch_parent(c).unwrap();
            assert!(kids.contains(&c));
            assert!(kids.iter().all(|&k| r.is_active(k)));
        }
    }

    #[test]
    fn face_kinds_around_a_refined_cell() {
        let m = unit_square(2, BoundaryMarker::DirichletOuter);
        let r = m.refine(&BTreeSet::from([0]));
        // cell 1 (right of cell 0) sees a finer left edge
        let f = r.face(1, 3);
        assert!(matches!(f, Face::Finer { .. }));
        if let Face::Finer { cells, mid } = f {
            assert_eq!(r.vertex(mid), [0.5, 0.25]);
            // first half starts at vertex 3 of cell 1, i.e. (0.5, 0.5)
            assert_eq!(r.centroid(cells[0]), [0.375, 0.375]);
        }
        let child = r.cell(0).children.unwrap()[1];
        assert!(matches!(r.face(child, 1), Face::Coarser { cell: 1, .. }));
        assert!(matches!(
            r.face(child, 0),
            Face::Boundary(BoundaryMarker::DirichletOuter)
        ));
        assert!(r.is_one_irregular());
    }
}
