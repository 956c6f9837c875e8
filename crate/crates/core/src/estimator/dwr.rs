use crate::fem::{
    edge_normal, edge_ref_point, gauss_legendre, to_physical, value_grad, CellMap, MappedPoint,
    PatchInterpolator, QuadratureRule,
};
use crate::kkt::{Discretization, DualState, KktState};
use crate::mesh::{Face, Point};
use crate::problems::BoundaryFlux;

use super::EstimatorError;

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    /// `ρ(w)(Π_h z^u, 0, Π_h z^λ)`
    pub eta_h_primal: f64,
    /// `ρ*(w, z)(Π_h u, 0, Π_h λ)`
    pub eta_h_dual: f64,
    /// `½ (primal + dual)`
    pub eta_h: f64,
    pub eta_kkt: f64,
    pub eta_total: f64,
    /// `(cell, |½ (η^p_K + η^d_K)|)` over active cells.
    pub per_cell: Vec<(usize, f64)>,
    /// Signed per-cell contributions, same order as `per_cell`.
    pub signed: Vec<f64>,
}

/// Weights for [`weighted_residual`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weights {
    /// `Π_h` of the complementary variable.
    Patch,
    /// The finite-element fields themselves.
    Identity,
}

const AFFINE_POINTS: usize = 3;
const CURVED_POINTS: usize = 8;

/// Values of the four fields on one cell: `u`, `λ`, `z^u`, `z^λ`.
struct CellFields {
    map: CellMap,
    vals: [[f64; 4]; 4],
    nodal: [[f64; 9]; 4],
}

const U: usize = 0;
const L: usize = 1;
const ZU: usize = 2;
const ZL: usize = 3;

/// Value and physical gradient of each field and of its patch correction at
/// one point.
struct PointData {
    mp: MappedPoint,
    v: [(f64, [f64; 2]); 4],
    pi: [(f64, [f64; 2]); 4],
}

impl CellFields {
    fn new(
        disc: &Discretization<'_>,
        pi: Option<&PatchInterpolator>,
        w: &KktState,
        z: &DualState,
        c: usize,
    ) -> Self {
        let mesh = disc.mesh;
        let fields = [&w.u.values, &w.lambda.values, &z.u.values, &z.lambda.values];
        let vals = fields.map(|f| mesh.cell(c).vertices.map(|v| f[v]));
        let nodal = match pi {
            Some(pi) => fields.map(|f| pi.nodal_values(c, f)),
            None => [[0.0; 9]; 4],
        };
        Self {
            map: CellMap::new(mesh.cell_points(c)),
            vals,
            nodal,
        }
    }

    fn at(&self, pi: Option<&PatchInterpolator>, c: usize, xi: [f64; 2]) -> PointData {
        let mp = self.map.at(xi);
        let v = std::array::from_fn(|k| value_grad(&self.vals[k], &mp));
        let pi = std::array::from_fn(|k| match pi {
            Some(p) => {
                let (val, g) = p.eval_ref(c, &self.nodal[k], &self.vals[k], xi);
                (val, to_physical(&mp.jinv, g))
            }
            None => v[k],
        });
        PointData { mp, v, pi }
    }

    fn laplacian(&self, k: usize, mp: &MappedPoint) -> f64 {
        self.map.laplacian(&self.vals[k], mp)
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cell_rule(map: &CellMap) -> QuadratureRule {
    QuadratureRule::tensor(if map.is_affine() {
        AFFINE_POINTS
    } else {
        CURVED_POINTS
    })
}

/// Source, reaction and tracking data at one point.
struct Data {
    d: f64,
    tracked: f64,
    n: f64,
    dn: f64,
    d2n: f64,
    f: f64,
    fq_z: f64,
}

fn point_data(
    disc: &Discretization<'_>,
    c: usize,
    x: Point,
    u: f64,
    w: &KktState,
    z: &DualState,
) -> Data {
    let p = disc.problem;
    let tracked = disc.tracked(c);
    let f = p.source(x, &w.q);
    let (n, dn, d2n) = p.reaction().eval(u);
    Data {
        d: if tracked { u - p.target(x) } else { 0.0 },
        tracked: if tracked { 1.0 } else { 0.0 },
        n,
        dn,
        d2n,
        f: f.val,
        fq_z: (0..w.q.len()).map(|a| f.grad[a] * z.q[a]).sum(),
    }
}

/// Neumann data terms `-(g, φ^λ)_Γ` and `-(g'·z^q, φ^λ)_Γ` of one cell, with
/// `φ^λ` the weight of the λ-equation (`Π_h z^λ` / `Π_h λ`, or the fields).
fn flux_terms(
    disc: &Discretization<'_>,
    flux: &BoundaryFlux,
    pi: Option<&PatchInterpolator>,
    cf: &CellFields,
    c: usize,
    z: &DualState,
) -> Result<(f64, f64, f64), EstimatorError> {
    let mesh = disc.mesh;
    let verts = mesh.cell(c).vertices;
    let (mut p, mut d, mut p_abs) = (0.0, 0.0, 0.0);
    for e in 0..4 {
        let Face::Boundary(marker) = mesh.face(c, e) else {
            continue;
        };
        let (a, b) = (mesh.vertex(verts[e]), mesh.vertex(verts[(e + 1) % 4]));
        let Some(rule) = flux
            .face_rule(a, b, marker)
            .map_err(crate::kkt::KktError::from)?
        else {
            continue;
        };
        let len = edge_normal(a, b).1;
        for (&t, &wt) in rule.points.iter().zip(&rule.weights) {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let Some(g) = flux.eval(x, marker) else {
                continue;
            };
            let pd = cf.at(pi, c, edge_ref_point(e, t));
            let ds = wt * len;
            let gz: f64 = (0..z.q.len()).map(|k| g.grad[k] * z.q[k]).sum();
            let tp = ds * g.val * pd.pi[ZL].0;
            p -= tp;
            p_abs += tp.abs();
            d -= ds * gz * pd.pi[L].0;
        }
    }
    Ok((p, d, p_abs))
}

/// Unlocalized weighted residuals with volume gradients:
/// `(ρ(w)(φ_z), ρ*(w, z)(φ_w))` in the convention `ρ = -L'` replaced by
/// `+L'` (so that `η_h = ½ (primal + dual)` directly), where the weights are
/// `Π_h z`, `Π_h w` or the fields themselves.
pub fn weighted_residual(
    disc: &Discretization<'_>,
    w: &KktState,
    z: &DualState,
    weights: Weights,
) -> Result<(f64, f64), EstimatorError> {
    weighted_residual_terms(disc, w, z, weights).map(|t| (t.0, t.1))
}

/// [`weighted_residual`] together with the sum of the absolute values of
/// the summed primal contributions, the scale of its rounding error.
pub fn weighted_residual_terms(
    disc: &Discretization<'_>,
    w: &KktState,
    z: &DualState,
    weights: Weights,
) -> Result<(f64, f64, f64), EstimatorError> {
    let pi_owned = match weights {
        Weights::Patch => Some(PatchInterpolator::new(disc.mesh)?),
        Weights::Identity => None,
    };
    let pi = pi_owned.as_ref();
    let sigma = disc.problem.sigma();
    let flux = disc
        .problem
        .boundary_flux(&w.q)
        .map_err(crate::kkt::KktError::from)?;
    let (mut primal, mut dual, mut primal_abs) = (0.0, 0.0, 0.0);
    for c in disc.mesh.active_cells() {
        let cf = CellFields::new(disc, pi, w, z, c);
        let rule = match weights {
            Weights::Patch => cell_rule(&cf.map),
            Weights::Identity => QuadratureRule::tensor(AFFINE_POINTS),
        };
        for (&xi, &wt) in rule.points.iter().zip(&rule.weights) {
            let pd = cf.at(pi, c, xi);
            let dx = wt * pd.mp.det;
            let [(u, gu), (l, gl), (zu, gzu), (zl, gzl)] = pd.v;
            let [(pu, gpu), (pl, gpl), (pzu, gpzu), (pzl, gpzl)] = pd.pi;
            let k = point_data(disc, c, pd.mp.x, u, w, z);
            let terms = [
                k.d * pzu,
                sigma * dot(gpzu, gl),
                k.dn * l * pzu,
                sigma * dot(gu, gpzl),
                (k.n - k.f) * pzl,
            ];
            primal += dx * terms.iter().sum::<f64>();
            primal_abs += dx.abs() * terms.iter().map(|t| t.abs()).sum::<f64>();
            dual += dx
                * (k.tracked * zu * pu
                    + k.d2n * l * zu * pu
                    + sigma * dot(gpu, gzl)
                    + k.dn * pu * zl
                    + sigma * dot(gpl, gzu)
                    + k.dn * zu * pl
                    - k.fq_z * pl);
        }
        let (fp, fd, fa) = flux_terms(disc, &flux, pi, &cf, c, z)?;
        primal += fp;
        dual += fd;
        primal_abs += fa;
    }
    Ok((primal, dual, primal_abs))
}

/// Reference coordinates in cell `c` of the point `x` on one of its edges.
fn locate_on_edge(disc: &Discretization<'_>, c: usize, x: Point) -> [f64; 2] {
    let p = disc.mesh.cell_points(c);
    let mut best = (f64::INFINITY, [0.0; 2]);
    for e in 0..4 {
        let (a, b) = (p[e], p[(e + 1) % 4]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let l2 = d[0] * d[0] + d[1] * d[1];
        let t = (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0);
        let dist = (a[0] + t * d[0] - x[0]).powi(2) + (a[1] + t * d[1] - x[1]).powi(2);
        if dist < best.0 {
            best = (dist, edge_ref_point(e, t));
        }
    }
    best.1
}

/// Cell-localized `η_h` parts: `(Σ η^p_K, Σ η^d_K, per-cell ½(η^p_K + η^d_K))`.
pub fn eta_h_localized(
    disc: &Discretization<'_>,
    w: &KktState,
    z: &DualState,
) -> Result<(f64, f64, Vec<(usize, f64)>), EstimatorError> {
    let mesh = disc.mesh;
    let pi = PatchInterpolator::new(mesh)?;
    let sigma = disc.problem.sigma();
    let flux = disc
        .problem
        .boundary_flux(&w.q)
        .map_err(crate::kkt::KktError::from)?;
    let (mut primal, mut dual) = (0.0, 0.0);
    let mut per_cell = Vec::with_capacity(mesh.n_active());
    let fields = [&w.u.values, &w.lambda.values, &z.u.values, &z.lambda.values];
    for c in mesh.active_cells() {
        let cf = CellFields::new(disc, Some(&pi), w, z, c);
        let (mut ep, mut ed) = (0.0, 0.0);
        let rule = cell_rule(&cf.map);
        for (&xi, &wt) in rule.points.iter().zip(&rule.weights) {
            let pd = cf.at(Some(&pi), c, xi);
            let dx = wt * pd.mp.det;
            let [(u, _), (l, _), (zu, _), (zl, _)] = pd.v;
            let [(pu, _), (pl, _), (pzu, _), (pzl, _)] = pd.pi;
            let k = point_data(disc, c, pd.mp.x, u, w, z);
            let lap = [U, L, ZU, ZL].map(|f| cf.laplacian(f, &pd.mp));
            ep += dx
                * ((k.d + k.dn * l - sigma * lap[L]) * pzu + (-sigma * lap[U] + k.n - k.f) * pzl);
            ed += dx
                * ((k.tracked * zu + k.d2n * l * zu + k.dn * zl - sigma * lap[ZL]) * pu
                    + (-sigma * lap[ZU] + k.dn * zu - k.fq_z) * pl);
        }

        // face terms
        let verts = mesh.cell(c).vertices;
        for e in 0..4 {
            let (a, b) = (mesh.vertex(verts[e]), mesh.vertex(verts[(e + 1) % 4]));
            let (normal, _) = edge_normal(a, b);
            // segments (start t, end t, neighbor) along the own edge
            let segments: Vec<(f64, f64, Option<usize>)> = match mesh.face(c, e) {
                Face::Boundary(m) if disc.problem.is_dirichlet(m) => continue,
                Face::Boundary(_) => vec![(0.0, 1.0, None)],
                Face::Same(n) | Face::Coarser { cell: n, .. } => vec![(0.0, 1.0, Some(n))],
                Face::Finer { cells, .. } => {
                    vec![(0.0, 0.5, Some(cells[0])), (0.5, 1.0, Some(cells[1]))]
                }
            };
            for (t0, t1, nb) in segments {
                let nb_map = nb.map(|n| (n, CellMap::new(mesh.cell_points(n))));
                let curved =
                    !cf.map.is_affine() || nb_map.as_ref().is_some_and(|(_, m)| !m.is_affine());
                let (gx, gw) = gauss_legendre(if curved { CURVED_POINTS } else { AFFINE_POINTS });
                let seg_len = edge_normal(a, b).1 * (t1 - t0);
                for (&s, &ws) in gx.iter().zip(&gw) {
                    let t = t0 + s * (t1 - t0);
                    let pd = cf.at(Some(&pi), c, edge_ref_point(e, t));
                    let ds = ws * seg_len;
                    // r(v) = σ/2 [∂_n v] inside, σ ∂_n v on Neumann faces
                    let r: [f64; 4] = match &nb_map {
                        None => [U, L, ZU, ZL].map(|f| sigma * dot(pd.v[f].1, normal)),
                        Some((n, m)) => {
                            let xi = locate_on_edge(disc, *n, pd.mp.x);
                            let mpn = m.at(xi);
                            let nverts = mesh.cell(*n).vertices;
                            [U, L, ZU, ZL].map(|f| {
                                let vals = nverts.map(|v| fields[f][v]);
                                let gn = value_grad(&vals, &mpn).1;
                                0.5 * sigma * (dot(pd.v[f].1, normal) - dot(gn, normal))
                            })
                        }
                    };
                    let [(pu, _), (pl, _), (pzu, _), (pzl, _)] = pd.pi;
                    ep += ds * (r[L] * pzu + r[U] * pzl);
                    ed += ds * (r[ZL] * pu + r[ZU] * pl);
                }
            }
        }
        let (fp, fd, _) = flux_terms(disc, &flux, Some(&pi), &cf, c, z)?;
        ep += fp;
        ed += fd;
        primal += ep;
        dual += ed;
        per_cell.push((c, 0.5 * (ep + ed)));
    }
    Ok((primal, dual, per_cell))
}

/// `η_KKT = -ρ(w)(z) = L'(w)(z)`.
pub fn eta_kkt(
    disc: &Discretization<'_>,
    w: &KktState,
    z: &DualState,
) -> Result<f64, EstimatorError> {
    let r = disc.residual(w)?;
    Ok(r.iter().zip(disc.to_vector(z)).map(|(a, b)| a * b).sum())
}

pub fn estimate(
    disc: &Discretization<'_>,
    w: &KktState,
    z: &DualState,
) -> Result<EstimatorReport, EstimatorError> {
    let (p, d, cells) = eta_h_localized(disc, w, z)?;
    let eta_kkt = eta_kkt(disc, w, z)?;
    let eta_h = 0.5 * (p + d);
    Ok(EstimatorReport {
        eta_h_primal: p,
        eta_h_dual: d,
        eta_h,
        eta_kkt,
        eta_total: eta_h + eta_kkt,
        signed: cells.iter().map(|e| e.1).collect(),
        per_cell: cells.iter().map(|&(c, v)| (c, v.abs())).collect(),
    })
}
