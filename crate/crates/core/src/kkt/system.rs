use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use crate::fem::{
    add_local_vector, edge_ref_point, shape, value_grad, CellMap, DofMap, FieldFn, QuadratureRule,
    Triplets,
};
use crate::linalg::{Ordering, SparseMatrix};
use crate::mesh::{Face, QuadMesh};
use crate::problems::ProblemDefinition;

use super::KktError;

/// Primal iterate `w = (u, q, λ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KktState {
    pub u: FieldFn,
    pub q: Vec<f64>,
    pub lambda: FieldFn,
}

/// Dual solution `z = (zᵘ, z^q, z^λ)`, laid out like [`KktState`].
pub type DualState = KktState;

impl KktState {
    /// Carry the iterate to a refined mesh.
    pub fn transfer(&self, fine: &QuadMesh, dofmap: &DofMap) -> Self {
        Self {
            u: self.u.transfer(fine, dofmap),
            q: self.q.clone(),
            lambda: self.lambda.transfer(fine, dofmap),
        }
    }
}

/// A problem discretized on one mesh.
///
/// Unknowns are ordered `[u (free dofs), q, λ (free dofs)]`; `u` and `λ` share
/// one dof map (homogeneous Dirichlet data is eliminated).
pub struct Discretization<'a> {
    pub problem: &'a dyn ProblemDefinition,
    pub mesh: &'a QuadMesh,
    pub dofmap: DofMap,
    pub ordering: Ordering,
    quad: QuadratureRule,
    factorizations: AtomicUsize,
}

/// Which parts of the Lagrangian to evaluate.
#[derive(Clone, Copy)]
struct Want {
    value: bool,
    residual: bool,
    hessian: bool,
}

struct Evaluation {
    value: f64,
    residual: Vec<f64>,
    hessian: Option<SparseMatrix<f64>>,
}

const VOLUME_POINTS: usize = 3;

impl<'a> Discretization<'a> {
    pub fn new(problem: &'a dyn ProblemDefinition, mesh: &'a QuadMesh) -> Self {
        let dofmap = DofMap::build(mesh, |m| problem.is_dirichlet(m));
        Self {
            problem,
            mesh,
            dofmap,
            ordering: Ordering::default(),
            quad: QuadratureRule::tensor(VOLUME_POINTS),
            factorizations: AtomicUsize::new(0),
        }
    }

    pub fn n_u(&self) -> usize {
        self.dofmap.n_free()
    }

    pub fn n_q(&self) -> usize {
        self.problem.control_dim()
    }

    pub fn dim(&self) -> usize {
        2 * self.n_u() + self.n_q()
    }

    /// Reported degrees of freedom: state and adjoint values at all mesh
    /// vertices in use.
    pub fn reported_dofs(&self) -> usize {
        2 * self.mesh.used_vertices().iter().filter(|&&u| u).count()
    }

    pub fn factorizations(&self) -> usize {
        self.factorizations.load(AtomicOrdering::Relaxed)
    }

    pub(crate) fn count_factorization(&self) {
        self.factorizations.fetch_add(1, AtomicOrdering::Relaxed);
    }

    /// `u = 0`, `λ = 0`, `q` from the problem.
    pub fn initial_state(&self) -> KktState {
        self.state_with_control(self.problem.initial_control())
    }

    pub fn state_with_control(&self, q: Vec<f64>) -> KktState {
        KktState {
            u: FieldFn::zeros(self.mesh.n_vertices()),
            q,
            lambda: FieldFn::zeros(self.mesh.n_vertices()),
        }
    }

    pub fn to_vector(&self, w: &KktState) -> Vec<f64> {
        let mut x = w.u.free(&self.dofmap);
        x.extend_from_slice(&w.q);
        x.extend(w.lambda.free(&self.dofmap));
        x
    }

    pub fn from_vector(&self, x: &[f64]) -> KktState {
        let (n, s) = (self.n_u(), self.n_q());
        KktState {
            u: FieldFn::from_free(&self.dofmap, &x[..n]),
            q: x[n..n + s].to_vec(),
            lambda: FieldFn::from_free(&self.dofmap, &x[n + s..]),
        }
    }

    /// `L(w) = J(u, q) + σ(∇u, ∇λ) + (N(u) - f(q), λ) - (g(q), λ)_Γ`
    pub fn lagrangian(&self, w: &KktState) -> Result<f64, KktError> {
        Ok(self
            .evaluate(
                w,
                Want {
                    value: true,
                    residual: false,
                    hessian: false,
                },
            )?
            .value)
    }

    /// `J(u, q) = ½ ∫_obs (u - û)² + α/2 |q|²`
    pub fn cost(&self, w: &KktState) -> Result<f64, KktError> {
        let zero = KktState {
            lambda: FieldFn::zeros(self.mesh.n_vertices()),
            ..w.clone()
        };
        self.lagrangian(&zero)
    }

    /// Weak residual `ρ(w)(φ)` for every basis function, blocks
    /// `(L'_u, L'_q, L'_λ)`.
    pub fn residual(&self, w: &KktState) -> Result<Vec<f64>, KktError> {
        Ok(self
            .evaluate(
                w,
                Want {
                    value: false,
                    residual: true,
                    hessian: false,
                },
            )?
            .residual)
    }

    pub fn hessian(&self, w: &KktState) -> Result<SparseMatrix<f64>, KktError> {
        Ok(self
            .evaluate(
                w,
                Want {
                    value: false,
                    residual: false,
                    hessian: true,
                },
            )?
            .hessian
            .expect("requested"))
    }

    pub fn residual_and_hessian(
        &self,
        w: &KktState,
    ) -> Result<(Vec<f64>, SparseMatrix<f64>), KktError> {
        let e = self.evaluate(
            w,
            Want {
                value: false,
                residual: true,
                hessian: true,
            },
        )?;
        Ok((e.residual, e.hessian.expect("requested")))
    }

    /// Derivative of the goal functional: `ζ = (0, ℐ'(q), 0)`.
    pub fn goal_rhs(&self, w: &KktState) -> Vec<f64> {
        let mut z = vec![0.0; self.dim()];
        let g = self.problem.goal_gradient(&w.q);
        z[self.n_u()..self.n_u() + self.n_q()].copy_from_slice(&g);
        z
    }

    pub fn goal(&self, w: &KktState) -> f64 {
        self.problem.goal(&w.q)
    }

    /// Whether cell `c` lies in the tracking region.
    pub fn tracked(&self, c: usize) -> bool {
        self.mesh.observation().is_none() || self.mesh.in_observation(c)
    }

    fn evaluate(&self, w: &KktState, want: Want) -> Result<Evaluation, KktError> {
        let p = self.problem;
        let (n, s) = (self.n_u(), self.n_q());
        if w.q.len() != s {
            return Err(KktError::ControlDimension {
                expected: s,
                found: w.q.len(),
            });
        }
        let q = &w.q;
        let lam_off = n + s;
        let sigma = p.sigma();
        let reaction = p.reaction();
        let dm = &self.dofmap;

        let mut value = 0.0;
        let mut res = vec![0.0; if want.residual { self.dim() } else { 0 }];
        let mut trip = Triplets::new();
        let mut hqq = vec![vec![0.0; s]; s];
        // q-λ coupling accumulated per vertex before scattering
        let mut hql: Vec<Vec<(usize, f64)>> = vec![Vec::new(); s];

        for c in self.mesh.active_cells() {
            let verts = self.mesh.cell(c).vertices;
            let map = CellMap::new(self.mesh.cell_points(c));
            let uc = w.u.cell_values(self.mesh, c);
            let lc = w.lambda.cell_values(self.mesh, c);
            let tracked = self.tracked(c);
            let mut ru = [0.0; 4];
            let mut rl = [0.0; 4];
            let mut huu = [[0.0; 4]; 4];
            let mut hul = [[0.0; 4]; 4];
            let mut fq = vec![[0.0; 4]; s];
            for (&xi, &wt) in self.quad.points.iter().zip(&self.quad.weights) {
                let mp = map.at(xi);
                let dx = wt * mp.det;
                let (u, gu) = value_grad(&uc, &mp);
                let (l, gl) = value_grad(&lc, &mp);
                let f = p.source(mp.x, q);
                let (nu, dnu, d2nu) = reaction.eval(u);
                let d = if tracked { u - p.target(mp.x) } else { 0.0 };
                if want.value {
                    value += dx
                        * (0.5 * d * d
                            + sigma * (gu[0] * gl[0] + gu[1] * gl[1])
                            + (nu - f.val) * l);
                }
                if want.residual {
                    for i in 0..4 {
                        let gi = mp.grad[i];
                        let phi = mp.phi[i];
                        ru[i] += dx
                            * (d * phi + sigma * (gi[0] * gl[0] + gi[1] * gl[1]) + dnu * phi * l);
                        rl[i] +=
                            dx * (sigma * (gu[0] * gi[0] + gu[1] * gi[1]) + (nu - f.val) * phi);
                    }
                    for a in 0..s {
                        res[n + a] -= dx * f.grad[a] * l;
                    }
                }
                if want.hessian {
                    let m = if tracked { 1.0 } else { 0.0 } + d2nu * l;
                    for i in 0..4 {
                        for j in 0..4 {
                            let pp = mp.phi[i] * mp.phi[j];
                            huu[i][j] += dx * m * pp;
                            hul[i][j] += dx
                                * (sigma
                                    * (mp.grad[i][0] * mp.grad[j][0]
                                        + mp.grad[i][1] * mp.grad[j][1])
                                    + dnu * pp);
                        }
                    }
                    for a in 0..s {
                        for b in 0..s {
                            hqq[a][b] -= dx * f.hess[a][b] * l;
                        }
                        if f.grad[a] != 0.0 {
                            for i in 0..4 {
                                fq[a][i] -= dx * f.grad[a] * mp.phi[i];
                            }
                        }
                    }
                }
            }
            if want.residual {
                add_local_vector(&mut res, dm, &verts, &ru, 0);
                add_local_vector(&mut res, dm, &verts, &rl, lam_off);
            }
            if want.hessian {
                trip.add_local(dm, &verts, &huu, 0, 0);
                trip.add_local(dm, &verts, &hul, 0, lam_off);
                let hlu = std::array::from_fn(|i| std::array::from_fn(|j| hul[j][i]));
                trip.add_local(dm, &verts, &hlu, lam_off, 0);
                for a in 0..s {
                    if fq[a].iter().any(|&v| v != 0.0) {
                        for i in 0..4 {
                            hql[a].push((verts[i], fq[a][i]));
                        }
                    }
                }
            }
        }

        // Neumann data
        let flux = p.boundary_flux(q)?;
        if !matches!(flux, crate::problems::BoundaryFlux::None) {
            for c in self.mesh.active_cells() {
                let verts = self.mesh.cell(c).vertices;
                for e in 0..4 {
                    let Face::Boundary(marker) = self.mesh.face(c, e) else {
                        continue;
                    };
                    let (a, b) = (
                        self.mesh.vertex(verts[e]),
                        self.mesh.vertex(verts[(e + 1) % 4]),
                    );
                    let Some(rule) = flux.face_rule(a, b, marker)? else {
                        continue;
                    };
                    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                    let lc = w.lambda.cell_values(self.mesh, c);
                    let mut rl = [0.0; 4];
                    let mut gq = vec![[0.0; 4]; s];
                    for (&t, &wt) in rule.points.iter().zip(&rule.weights) {
                        let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                        let Some(g) = flux.eval(x, marker) else {
                            continue;
                        };
                        let phi = shape(edge_ref_point(e, t));
                        let l: f64 = (0..4).map(|i| lc[i] * phi[i]).sum();
                        let ds = wt * len;
                        if want.value {
                            value -= ds * g.val * l;
                        }
                        if want.residual {
                            for i in 0..4 {
                                rl[i] -= ds * g.val * phi[i];
                            }
                            for a in 0..s {
                                res[n + a] -= ds * g.grad[a] * l;
                            }
                        }
                        if want.hessian {
                            for a in 0..s {
                                for b in 0..s {
                                    hqq[a][b] -= ds * g.hess[a][b] * l;
                                }
                                for i in 0..4 {
                                    gq[a][i] -= ds * g.grad[a] * phi[i];
                                }
                            }
                        }
                    }
                    if want.residual {
                        add_local_vector(&mut res, dm, &verts, &rl, lam_off);
                    }
                    if want.hessian {
                        for a in 0..s {
                            for i in 0..4 {
                                hql[a].push((verts[i], gq[a][i]));
                            }
                        }
                    }
                }
            }
        }

        // control regularization
        let alpha = p.alpha();
        if want.value {
            value += 0.5 * alpha * q.iter().map(|v| v * v).sum::<f64>();
        }
        if want.residual {
            for a in 0..s {
                res[n + a] += alpha * q[a];
            }
        }
        let hessian = if want.hessian {
            for a in 0..s {
                for b in 0..s {
                    let v = hqq[a][b] + if a == b { alpha } else { 0.0 };
                    trip.push(n + a, n + b, v);
                }
                for &(v, val) in &hql[a] {
                    for &(d, wd) in dm.expansion(v) {
                        trip.push(n + a, lam_off + d, wd * val);
                        trip.push(lam_off + d, n + a, wd * val);
                    }
                }
            }
            Some(trip.into_matrix(self.dim()))
        } else {
            None
        };
        Ok(Evaluation {
            value,
            residual: res,
            hessian,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kkt::{linearize, newton_step, NewtonConfig};
    use crate::problems::{
        ElectrodeConfig, ElectrodeProblem, SlitProblem, SlitVariant, SquareSource,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(d: &Discretization<'_>, rng: &mut ChaCha8Rng, q: &[f64]) -> KktState {
        let mut x: Vec<f64> = (0..d.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        x[d.n_u()..d.n_u() + d.n_q()].copy_from_slice(q);
        d.from_vector(&x)
    }

    fn shifted(d: &Discretization<'_>, w: &KktState, v: &[f64], h: f64) -> KktState {
        let x: Vec<f64> = d
            .to_vector(w)
            .iter()
            .zip(v)
            .map(|(a, b)| a + h * b)
            .collect();
        d.from_vector(&x)
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Residual against central differences of the Lagrangian and Hessian
    /// against central differences of the residual.
    fn check_derivatives(d: &Discretization<'_>, q: &[f64], seed: u64, dirs: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_state(d, &mut rng, q);
        let r = d.residual(&w).unwrap();
        let hm = d.hessian(&w).unwrap();
        assert!(hm.asymmetry() <= 1e-12 * hm.max_abs());
        for _ in 0..dirs {
            let v: Vec<f64> = (0..d.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h = 1e-4;
            let lp = d.lagrangian(&shifted(d, &w, &v, h)).unwrap();
            let lm = d.lagrangian(&shifted(d, &w, &v, -h)).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let an = dot(&r, &v);
            assert!(
                (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                "first: {fd} vs {an}"
            );
            let rp = d.residual(&shifted(d, &w, &v, h)).unwrap();
            let rm = d.residual(&shifted(d, &w, &v, -h)).unwrap();
            let hv = hm.mul_vec(&v).unwrap();
            let diff: f64 = rp
                .iter()
                .zip(&rm)
                .zip(&hv)
                .map(|((a, b), c)| ((a - b) / (2.0 * h) - c).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(diff <= 1e-4 * scale.max(1e-8), "second: {diff} vs {scale}");
        }
    }

    #[test]
    fn one_dof_closed_form() {
        let p = SquareSource::default();
        let mesh = p.initial_mesh().unwrap();
        let d = Discretization::new(&p, &mesh);
        assert_eq!(d.n_u(), 1);
        let cfg = NewtonConfig::default();
        let (w, rep) = newton_step(&d, &d.initial_state(), &cfg).unwrap();
        assert!(rep.residual_after <= 1e-12);
        let c = 3.0 / (32.0 * p.sigma);
        let q = 0.25 * c / (c * c / 9.0 + p.alpha);
        assert!((w.q[0] - q).abs() <= 1e-12 * q);
        let centre = d.dofmap.free_vertex(0);
        assert!((w.u.values[centre] - c * q).abs() <= 1e-12 * c * q);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for v in [
            SlitVariant::Linear,
            SlitVariant::LinearFlux,
            SlitVariant::Nonlinear,
        ] {
            let p = SlitProblem::variant(v);
            let mesh = p.initial_mesh().unwrap();
            let d = Discretization::new(&p, &mesh);
            check_derivatives(&d, &[0.8], 1, 5);
        }
        let p = SquareSource::default();
        let mesh = p.initial_mesh().unwrap().refine_global();
        check_derivatives(&Discretization::new(&p, &mesh), &[0.3], 2, 5);
    }

    #[test]
    fn electrode_derivatives_match_finite_differences() {
        let mut cfg = ElectrodeConfig::default();
        cfg.design.free_s = vec![true, true];
        cfg.alpha = 1e-2;
        let p = ElectrodeProblem::new(cfg).unwrap();
        let mesh = crate::mesh::make_pipette_mesh(&p.cfg.geometry).unwrap();
        let d = Discretization::new(&p, &mesh);
        check_derivatives(&d, &[10.0, 20.0, 1.0, 2.0], 3, 5);
    }

    #[test]
    fn block_decoupling_at_state_solution() {
        let p = SlitProblem::variant(SlitVariant::Linear);
        let mesh = p.initial_mesh().unwrap();
        let d = Discretization::new(&p, &mesh);
        // solve the state equation for q = 0.5 with λ = 0
        let w0 = d.state_with_control(vec![0.5]);
        let (r, h) = d.residual_and_hessian(&w0).unwrap();
        let n = d.n_u();
        let mut trip = Vec::new();
        for i in 0..n {
            for (j, v) in h.row(n + 1 + i) {
                if j < n {
                    trip.push((i, j, v));
                }
            }
        }
        let k = SparseMatrix::from_triplets(n, n, &trip).unwrap();
        let rhs: Vec<f64> = r[n + 1..].iter().map(|v| -v).collect();
        let u = crate::linalg::factorize(&k).unwrap().solve(&rhs).unwrap();
        let mut x = vec![0.0; d.dim()];
        x[..n].copy_from_slice(&u);
        x[n] = 0.5;
        let w = d.from_vector(&x);
        let r = d.residual(&w).unwrap();
        assert!(r[n + 1..].iter().all(|v| v.abs() <= 1e-12));
        // remaining u-block is the tracking term alone
        let track = d
            .residual(&KktState {
                lambda: FieldFn::zeros(mesh.n_vertices()),
                ..w.clone()
            })
            .unwrap();
        assert_eq!(&r[..n], &track[..n]);
        assert!((r[n] - p.cfg.alpha * 0.5).abs() <= 1e-18);
    }

    #[test]
    fn zero_control_gives_zero_state() {
        let p = SlitProblem::variant(SlitVariant::Linear);
        let mesh = p.initial_mesh().unwrap();
        let d = Discretization::new(&p, &mesh);
        let w = d.state_with_control(vec![0.0]);
        let r = d.residual(&w).unwrap();
        assert!(r[d.n_u() + 1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lq_hessian_is_state_independent() {
        let p = SlitProblem::variant(SlitVariant::LinearFlux);
        let mesh = p.initial_mesh().unwrap();
        let d = Discretization::new(&p, &mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h1 = d.hessian(&random_state(&d, &mut rng, &[0.1])).unwrap();
        let h2 = d.hessian(&random_state(&d, &mut rng, &[3.0])).unwrap();
        assert_eq!(h1.col_indices(), h2.col_indices());
        for (a, b) in h1.values().iter().zip(h2.values()) {
            assert!((a - b).abs() <= 1e-14 * h1.max_abs());
        }
    }

    #[test]
    fn lq_newton_converges_in_one_step() {
        let p = SlitProblem::variant(SlitVariant::LinearFlux);
        let mesh = p.initial_mesh().unwrap().refine_global();
        let d = Discretization::new(&p, &mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..3 {
            let q0 = rng.gen_range(-2.0..2.0);
            let w = random_state(&d, &mut rng, &[q0]);
            let (_, rep) = newton_step(&d, &w, &NewtonConfig::default()).unwrap();
            assert!(rep.residual_after <= 1e-10, "{rep:?}");
        }
        // damping halves the residual
        let cfg = NewtonConfig {
            damping: 0.5,
            ..Default::default()
        };
        let mut w = d.initial_state();
        for _ in 0..3 {
            let (next, rep) = newton_step(&d, &w, &cfg).unwrap();
            let ratio = rep.residual_after / rep.residual_before;
            assert!((ratio - 0.5).abs() < 1e-8, "{ratio}");
            w = next;
        }
    }

    #[test]
    fn dual_rhs_and_factorization_reuse() {
        let p = SlitProblem::variant(SlitVariant::Nonlinear);
        let mesh = p.initial_mesh().unwrap();
        let d = Discretization::new(&p, &mesh);
        let w = d.initial_state();
        let zeta = d.goal_rhs(&w);
        let n = d.n_u();
        assert!(zeta
            .iter()
            .enumerate()
            .all(|(i, v)| if i == n { *v == 2.0 } else { *v == 0.0 }));
        let lin = linearize(&d, &w).unwrap();
        let (w1, _) = lin.update(&d, &w, 1.0).unwrap();
        let z = lin.solve_dual(&d, &w).unwrap();
        assert_eq!(d.factorizations(), 1);
        let h = d.hessian(&w).unwrap();
        let hz = h.mul_vec(&d.to_vector(&z)).unwrap();
        for (a, b) in hz.iter().zip(&zeta) {
            assert!((a + b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
        assert_ne!(w1, w);
    }
}
