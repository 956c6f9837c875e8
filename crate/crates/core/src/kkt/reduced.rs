//! Globalized Newton in the control variables: state and multiplier are
//! kept on their equations, the control step uses the Schur complement of
//! the Hessian, shifted to be positive definite, with backtracking on `J`.

use super::newton::{linearize, norm, Linearization, NewtonConfig};
use super::{Discretization, KktError, KktState};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ReducedOutcome {
    pub state: KktState,
    pub cost: f64,
    pub steps: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Cholesky factor of a small symmetric matrix, `None` unless positive
/// definite.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Small dense solve with partial pivoting.
fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(r, &bi)| r.iter().copied().chain([bi]).collect())
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c] == 0.0 {
            return None;
        }
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    Some(x)
}

/// `H⁻¹ e_j` for the control unknowns.
struct ControlResponse {
    columns: Vec<Vec<f64>>,
    /// `(H⁻¹)_qq`, the inverse of the control Schur complement.
    t: Vec<Vec<f64>>,
}

fn control_response(
    disc: &Discretization<'_>,
    lin: &Linearization,
) -> Result<ControlResponse, KktError> {
    let (n, s) = (disc.n_u(), disc.n_q());
    let mut columns = Vec::with_capacity(s);
    for j in 0..s {
        let mut e = vec![0.0; disc.dim()];
        e[n + j] = 1.0;
        columns.push(lin.solve(&e)?);
    }
    let t = (0..s)
        .map(|i| (0..s).map(|j| columns[j][n + i]).collect())
        .collect();
    Ok(ControlResponse { columns, t })
}

/// Newton step for `u` and `λ` with the control step prescribed as `dq`.
fn step_with_control(
    disc: &Discretization<'_>,
    lin: &Linearization,
    resp: &ControlResponse,
    w: &KktState,
    dq: &[f64],
) -> Result<KktState, KktError> {
    let n = disc.n_u();
    let d0 = lin.direction()?;
    let mut x = disc.to_vector(w);
    if !dq.is_empty() {
        let gap: Vec<f64> = dq.iter().enumerate().map(|(i, v)| v - d0[n + i]).collect();
        let mu = dense_solve(&resp.t, &gap).ok_or(KktError::SingularControlBlock)?;
        for (k, xk) in x.iter_mut().enumerate() {
            *xk += d0[k]
                + resp
                    .columns
                    .iter()
                    .zip(&mu)
                    .map(|(c, m)| c[k] * m)
                    .sum::<f64>();
        }
    } else {
        for (xk, dk) in x.iter_mut().zip(&d0) {
            *xk += dk;
        }
    }
    let mut next = disc.from_vector(&x);
    for (i, v) in next.q.iter_mut().enumerate() {
        *v = w.q[i] + dq[i];
    }
    Ok(next)
}

fn state_residual(disc: &Discretization<'_>, r: &[f64]) -> f64 {
    let (n, s) = (disc.n_u(), disc.n_q());
    norm(&r[..n]).hypot(norm(&r[n + s..]))
}

/// Solve the state and multiplier equations at fixed control.
fn restore(
    disc: &Discretization<'_>,
    mut w: KktState,
    tol: f64,
    max_steps: usize,
) -> Result<KktState, KktError> {
    let zero = vec![0.0; disc.n_q()];
    for _ in 0..max_steps {
        let r = disc.residual(&w)?;
        if state_residual(disc, &r) < tol {
            break;
        }
        let lin = linearize(disc, &w)?;
        let resp = control_response(disc, &lin)?;
        w = step_with_control(disc, &lin, &resp, &w, &zero)?;
    }
    Ok(w)
}

/// Linear inequality `a · q ≤ b` on the controls.
pub type Constraint = (Vec<f64>, f64);

/// Minimize `J` over the controls on a fixed mesh. Converges to a local
/// minimizer with `J` non-increasing between accepted iterates.
pub fn minimize_reduced(
    disc: &Discretization<'_>,
    w0: KktState,
    cfg: &NewtonConfig,
) -> Result<ReducedOutcome, KktError> {
    minimize_reduced_within(disc, w0, cfg, &[])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer of `g·d + ½ dᵀBd` subject to `a_i · d = 0` for `i` in
/// `active`, with the multipliers of the active rows.
fn equality_step(
    b: &[Vec<f64>],
    g: &[f64],
    cons: &[Constraint],
    active: &[usize],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let (s, m) = (g.len(), active.len());
    let mut k = vec![vec![0.0; s + m]; s + m];
    let mut rhs = vec![0.0; s + m];
    for i in 0..s {
        k[i][..s].copy_from_slice(&b[i]);
        rhs[i] = -g[i];
    }
    for (r, &c) in active.iter().enumerate() {
        for j in 0..s {
            k[s + r][j] = cons[c].0[j];
            k[j][s + r] = cons[c].0[j];
        }
    }
    let x = dense_solve(&k, &rhs)?;
    Some((x[..s].to_vec(), x[s..].to_vec()))
}

/// [`minimize_reduced`] restricted to `a · q ≤ b` for every constraint.
/// Active constraints are kept as equalities and released when their
/// multiplier turns negative; steps stop at the first constraint they hit.
/// The start should be feasible.
pub fn minimize_reduced_within(
    disc: &Discretization<'_>,
    w0: KktState,
    cfg: &NewtonConfig,
    cons: &[Constraint],
) -> Result<ReducedOutcome, KktError> {
    let tol_state = 0.1 * cfg.tol_kkt;
    let mut w = restore(disc, w0, tol_state, cfg.max_steps)?;
    let mut cost = disc.cost(&w)?;
    let mut steps = 0;
    let bscale = cons.iter().fold(1.0f64, |m, c| m.max(c.1.abs()));
    let tiny = 1e-12 * bscale;
    loop {
        let lin = linearize(disc, &w)?;
        let s = disc.n_q();
        let done = |w: KktState, cost, steps, converged| ReducedOutcome {
            converged,
            residual: lin.residual_norm,
            state: w,
            cost,
            steps,
        };
        if lin.residual_norm < cfg.tol_kkt || s == 0 {
            return Ok(done(
                w,
                cost,
                steps,
                s == 0 || lin.residual_norm < cfg.tol_kkt,
            ));
        }
        if steps >= cfg.max_steps {
            return Ok(done(w, cost, steps, false));
        }
        let n = disc.n_u();
        let grad: Vec<f64> = (0..s).map(|i| lin.residual[n + i]).collect();
        let resp = control_response(disc, &lin)?;
        let schur: Vec<Vec<f64>> = (0..s)
            .map(|j| {
                let mut e = vec![0.0; s];
                e[j] = 1.0;
                dense_solve(&resp.t, &e).ok_or(KktError::SingularControlBlock)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let scale = (0..s)
            .map(|i| schur[i][i].abs())
            .fold(f64::MIN_POSITIVE, f64::max);
        let mut shift = 0.0;
        let hess = loop {
            let shifted: Vec<Vec<f64>> = (0..s)
                .map(|i| {
                    (0..s)
                        .map(|j| {
                            0.5 * (schur[i][j] + schur[j][i]) + if i == j { shift } else { 0.0 }
                        })
                        .collect()
                })
                .collect();
            if cholesky(&shifted).is_some() {
                break shifted;
            }
            shift = if shift == 0.0 {
                1e-8 * scale
            } else {
                4.0 * shift
            };
        };

        let slack: Vec<f64> = cons.iter().map(|(a, b)| b - dot(a, &w.q)).collect();
        let mut active: Vec<usize> = (0..cons.len()).filter(|&i| slack[i] <= tiny).collect();
        let dir = loop {
            let (d, mu) = match equality_step(&hess, &grad, cons, &active) {
                Some(x) => x,
                None => {
                    active.pop();
                    continue;
                }
            };
            let reduced: Vec<f64> = (0..s).map(|i| dot(&hess[i], &d)).collect();
            if norm(&reduced) < cfg.tol_kkt {
                let release = (0..active.len())
                    .filter(|&r| mu[r] < 0.0)
                    .min_by(|&a, &b| mu[a].total_cmp(&mu[b]));
                match release {
                    Some(r) => {
                        active.remove(r);
                        continue;
                    }
                    // stationary on the active constraints
                    None => return Ok(done(w, cost, steps, true)),
                }
            }
            break d;
        };
        let slope = dot(&grad, &dir);
        let t_max = cons
            .iter()
            .enumerate()
            .filter(|(i, (a, _))| !active.contains(i) && dot(a, &dir) > 0.0)
            .map(|(i, (a, _))| slack[i].max(0.0) / dot(a, &dir))
            .fold(1.0f64, f64::min);

        let mut t = t_max;
        loop {
            let dq: Vec<f64> = dir.iter().map(|d| t * d).collect();
            let trial = step_with_control(disc, &lin, &resp, &w, &dq)?;
            let trial = restore(disc, trial, tol_state, cfg.max_steps)?;
            let c = disc.cost(&trial)?;
            if c.is_finite() && c <= cost + ARMIJO * t * slope {
                w = trial;
                cost = c;
                break;
            }
            t *= 0.5;
            if t < MIN_STEP {
                return Ok(done(w, cost, steps, false));
            }
        }
        steps += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{ProblemDefinition, SlitConfig, SlitProblem, SlitVariant};

    #[test]
    fn small_dense_helpers() {
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let l = cholesky(&a).unwrap();
        assert!((l[0][0] - 2.0).abs() < 1e-15 && (l[1][0] - 1.0).abs() < 1e-15);
        assert!((l[1][1] - 2f64.sqrt()).abs() < 1e-15);
        assert!(cholesky(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_none());
        let y = dense_solve(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[3.0, 4.0]).unwrap();
        assert_eq!(y, vec![4.0, 3.0]);
    }

    #[test]
    fn matches_plain_newton_at_a_minimum() {
        let p = SlitProblem::new(SlitConfig {
            variant: SlitVariant::Nonlinear,
            ..Default::default()
        });
        let mesh = p.initial_mesh().unwrap().refine_global();
        let disc = Discretization::new(&p, &mesh);
        let cfg = NewtonConfig::default();
        let out = minimize_reduced(&disc, disc.initial_state(), &cfg).unwrap();
        assert!(out.converged);
        let mut w = disc.initial_state();
        for _ in 0..30 {
            let lin = linearize(&disc, &w).unwrap();
            if lin.residual_norm < 1e-11 {
                break;
            }
            w = lin.update(&disc, &w, 1.0).unwrap().0;
        }
        assert!((w.q[0] - out.state.q[0]).abs() < 1e-8 * w.q[0].abs());
    }

    #[test]
    fn constraints_clip_or_leave_the_minimum() {
        let p = SlitProblem::new(SlitConfig {
            variant: SlitVariant::Nonlinear,
            ..Default::default()
        });
        let mesh = p.initial_mesh().unwrap().refine_global();
        let disc = Discretization::new(&p, &mesh);
        let cfg = NewtonConfig::default();
        let free = minimize_reduced(&disc, disc.initial_state(), &cfg).unwrap();
        let qs = free.state.q[0];
        assert!(qs > 0.5);

        let cap = 0.5 * qs;
        // the start has to be feasible
        let w0 = disc.state_with_control(vec![0.5 * cap]);
        let out = minimize_reduced_within(&disc, w0, &cfg, &[(vec![1.0], cap)]).unwrap();
        assert!(out.converged);
        assert!((out.state.q[0] - cap).abs() <= 1e-10);
        assert!(out.cost >= free.cost);

        let loose = minimize_reduced_within(&disc, disc.initial_state(), &cfg, &[(vec![1.0], 2.0 * qs)]).unwrap();
        assert!((loose.state.q[0] - qs).abs() <= 1e-8 * qs);
    }

    #[test]
    fn escapes_the_stationary_zero_control() {
        // q = 0 is stationary for the quadratic flux, but not a minimum
        let p = SlitProblem::new(SlitConfig {
            q0: 1e-3,
            ..Default::default()
        });
        let mesh = p.initial_mesh().unwrap();
        let disc = Discretization::new(&p, &mesh);
        let out = minimize_reduced(&disc, disc.initial_state(), &NewtonConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.state.q[0].abs() > 0.5);
    }
}
