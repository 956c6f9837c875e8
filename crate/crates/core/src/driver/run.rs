use std::time::Instant;

use serde::Serialize;

use crate::estimator::{
    effectivity, estimate, mark, weighted_residual, weighted_residual_terms, EstimatorReport,
    Weights,
};
use crate::kkt::{linearize, Discretization, DualState, KktState, Linearization, NewtonConfig};
use crate::linalg::Ordering;
use crate::mesh::QuadMesh;
use crate::problems::ProblemDefinition;

use super::output::OutputSink;
use super::{Algorithm, DriverError, ReferenceSpec, RunConfig};

/// One row per mesh level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub dofs: usize,
    pub goal: f64,
    /// `ℐ_ref - ℐ(w̃_h)` when a reference is known.
    pub goal_error: Option<f64>,
    pub eta_h: f64,
    pub eta_kkt: f64,
    pub eta_total: f64,
    /// `η / (ℐ_ref - ℐ(w̃_h))`
    pub i_eff: Option<f64>,
    pub residual: f64,
    pub converged: bool,
    pub newton_steps: usize,
    pub factorizations: usize,
    pub cost: f64,
    /// Control values separated by `;`.
    pub control: String,
    pub wall_time_s: f64,
    /// Relative gap between localized and unlocalized `η_h` parts.
    pub identity_gap: Option<f64>,
    /// Gap between `η_KKT` and an independent evaluation of `-ρ(w)(z)`,
    /// relative to the summed magnitudes of the independent evaluation.
    pub kkt_gap: Option<f64>,
}

/// One line per Newton step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepTrace {
    pub level: usize,
    pub step: usize,
    pub dofs: usize,
    pub residual: f64,
    pub eta_h: Option<f64>,
    pub eta_kkt: Option<f64>,
    pub wall_time_s: f64,
}

pub struct RunResult {
    pub rows: Vec<ConvergenceRow>,
    pub trace: Vec<StepTrace>,
    pub mesh: QuadMesh,
    pub state: KktState,
    pub reference: Option<f64>,
}

impl RunResult {
    pub fn total_factorizations(&self) -> usize {
        self.rows.iter().map(|r| r.factorizations).sum()
    }
}

struct LevelOutcome {
    state: KktState,
    dual: DualState,
    report: EstimatorReport,
    steps: usize,
    residual: f64,
    converged: bool,
}

/// Newton until `‖ρ‖ < tol_kkt`, then one dual solve with the last
/// factorization. Returns the final iterate, its linearization and the
/// number of steps.
pub fn solve_to_tolerance(
    disc: &Discretization<'_>,
    mut w: KktState,
    newton: &NewtonConfig,
    mut on_step: impl FnMut(usize, f64),
) -> Result<(KktState, Linearization, usize), DriverError> {
    let mut lin = linearize(disc, &w)?;
    let mut steps = 0;
    while lin.residual_norm >= newton.tol_kkt && steps < newton.max_steps {
        w = lin.update(disc, &w, newton.damping)?.0;
        steps += 1;
        lin = linearize(disc, &w)?;
        on_step(steps, lin.residual_norm);
    }
    Ok((w, lin, steps))
}

fn converged_level(
    disc: &Discretization<'_>,
    w: KktState,
    newton: &NewtonConfig,
    on_step: impl FnMut(usize, f64),
) -> Result<LevelOutcome, DriverError> {
    let (w, lin, steps) = solve_to_tolerance(disc, w, newton, on_step)?;
    let z = lin.solve_dual(disc, &w)?;
    let report = estimate(disc, &w, &z)?;
    Ok(LevelOutcome {
        residual: lin.residual_norm,
        converged: lin.residual_norm < newton.tol_kkt,
        state: w,
        dual: z,
        report,
        steps,
    })
}

/// Newton steps with a dual solve after each, while
/// `|η_KKT| > c_b |η_h|`; at least one step per level.
fn balanced_level(
    disc: &Discretization<'_>,
    mut w: KktState,
    newton: &NewtonConfig,
    c_b: f64,
    mut on_step: impl FnMut(usize, f64, &EstimatorReport),
) -> Result<LevelOutcome, DriverError> {
    let mut lin = linearize(disc, &w)?;
    let mut z = lin.solve_dual(disc, &w)?;
    let mut report = estimate(disc, &w, &z)?;
    let mut steps = 0;
    while steps < newton.max_steps
        && (steps == 0 || report.eta_kkt.abs() > c_b * report.eta_h.abs())
    {
        w = lin.update(disc, &w, newton.damping)?.0;
        steps += 1;
        lin = linearize(disc, &w)?;
        z = lin.solve_dual(disc, &w)?;
        report = estimate(disc, &w, &z)?;
        on_step(steps, lin.residual_norm, &report);
    }
    Ok(LevelOutcome {
        residual: lin.residual_norm,
        converged: report.eta_kkt.abs() <= c_b * report.eta_h.abs(),
        state: w,
        dual: z,
        report,
        steps,
    })
}

fn identity_gaps(
    disc: &Discretization<'_>,
    w: &KktState,
    z: &DualState,
    rep: &EstimatorReport,
) -> Result<(f64, f64), DriverError> {
    let (up, ud) = weighted_residual(disc, w, z, Weights::Patch)?;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    let gap = rel(rep.eta_h_primal, up).max(rel(rep.eta_h_dual, ud));
    let (ip, _, ip_abs) = weighted_residual_terms(disc, w, z, Weights::Identity)?;
    let r = disc.residual(w)?;
    let rq: Vec<f64> = (0..disc.n_q())
        .map(|a| r[disc.n_u() + a] * z.q[a])
        .collect();
    let scale = ip_abs + rq.iter().map(|v| v.abs()).sum::<f64>();
    let independent = ip + rq.iter().sum::<f64>();
    Ok((
        gap,
        (rep.eta_kkt - independent).abs() / scale.max(f64::MIN_POSITIVE),
    ))
}

fn control_string(q: &[f64]) -> String {
    q.iter()
        .map(|v| format!("{v:.10}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Run one of the three algorithms. `reference` overrides the config's
/// reference specification.
pub fn run(
    cfg: &RunConfig,
    algorithm: Algorithm,
    reference: Option<f64>,
) -> Result<RunResult, DriverError> {
    cfg.validate().map_err(DriverError::Config)?;
    let problem = cfg.problem.build()?;
    let reference = match (reference, cfg.reference) {
        (Some(r), _) => Some(r),
        (None, ReferenceSpec::Value(v)) => Some(v),
        (None, ReferenceSpec::Compute { max_dofs }) => Some(cached_reference_goal(cfg, max_dofs)?),
        (None, ReferenceSpec::None) => None,
    };
    let mut sink = OutputSink::new(&cfg.output)?;
    run_problem(&*problem, cfg, algorithm, reference, &mut sink)
}

pub fn run_global(cfg: &RunConfig) -> Result<RunResult, DriverError> {
    run(cfg, Algorithm::Global, None)
}

pub fn run_mesh_adaptive(cfg: &RunConfig) -> Result<RunResult, DriverError> {
    run(cfg, Algorithm::MeshAdaptive, None)
}

pub fn run_fully_adaptive(cfg: &RunConfig) -> Result<RunResult, DriverError> {
    run(cfg, Algorithm::FullyAdaptive, None)
}

pub(crate) fn run_problem(
    problem: &dyn ProblemDefinition,
    cfg: &RunConfig,
    algorithm: Algorithm,
    reference: Option<f64>,
    sink: &mut OutputSink,
) -> Result<RunResult, DriverError> {
    let start = Instant::now();
    let mut mesh = problem.initial_mesh()?;
    let mut carried: Option<KktState> = None;
    let mut rows = Vec::new();
    let mut trace = Vec::new();
    let mut tol = cfg.tol;
    let mut level = 0;
    loop {
        let mut disc = Discretization::new(problem, &mesh);
        disc.ordering = cfg.ordering;
        let dofs = disc.reported_dofs();
        let w0 = match carried.take() {
            None => disc.initial_state(),
            Some(prev) => prev.transfer(&mesh, &disc.dofmap),
        };
        if level == 0 && cfg.output.matrix_market {
            sink.matrix_market(&disc.hessian(&w0)?)?;
        }
        let mut level_trace = Vec::new();
        let elapsed = || start.elapsed().as_secs_f64();
        let out = match algorithm {
            Algorithm::Global | Algorithm::MeshAdaptive => {
                converged_level(&disc, w0, &cfg.newton, |step, r| {
                    level_trace.push(StepTrace {
                        level,
                        step,
                        dofs,
                        residual: r,
                        eta_h: None,
                        eta_kkt: None,
                        wall_time_s: elapsed(),
                    })
                })?
            }
            Algorithm::FullyAdaptive => {
                balanced_level(&disc, w0, &cfg.newton, cfg.c_b, |step, r, rep| {
                    level_trace.push(StepTrace {
                        level,
                        step,
                        dofs,
                        residual: r,
                        eta_h: Some(rep.eta_h),
                        eta_kkt: Some(rep.eta_kkt),
                        wall_time_s: elapsed(),
                    })
                })?
            }
        };
        let goal = disc.goal(&out.state);
        let rep = &out.report;
        let (identity_gap, kkt_gap) = if cfg.check_identity {
            let (a, b) = identity_gaps(&disc, &out.state, &out.dual, rep)?;
            (Some(a), Some(b))
        } else {
            (None, None)
        };
        let goal_error = reference.map(|r| r - goal);
        let row = ConvergenceRow {
            level,
            dofs,
            goal,
            goal_error,
            eta_h: rep.eta_h,
            eta_kkt: rep.eta_kkt,
            eta_total: rep.eta_total,
            i_eff: reference.and_then(|r| effectivity(rep.eta_total, r, goal).ok()),
            residual: out.residual,
            converged: out.converged,
            newton_steps: out.steps,
            factorizations: disc.factorizations(),
            cost: disc.cost(&out.state)?,
            control: control_string(&out.state.q),
            wall_time_s: elapsed(),
            identity_gap,
            kkt_gap,
        };
        sink.level(&mesh, &out.state, &out.dual, rep, &row, &level_trace)?;
        trace.extend(level_trace);
        rows.push(row);

        let tol_now = *tol.get_or_insert(cfg.tol_rel * rep.eta_total.abs());
        let done = level >= cfg.n_ref
            || dofs >= cfg.max_dofs
            || (algorithm != Algorithm::Global && rep.eta_total.abs() < tol_now);
        let next = if done {
            None
        } else if algorithm == Algorithm::Global {
            Some(mesh.refine_global())
        } else {
            Some(mesh.refine(&mark(&rep.per_cell, cfg.marking)))
        };
        drop(disc);
        carried = Some(out.state);
        match next {
            Some(m) => mesh = m,
            None => break,
        }
        level += 1;
    }
    sink.finish(&rows)?;
    Ok(RunResult {
        rows,
        trace,
        mesh,
        state: carried.expect("at least one level"),
        reference,
    })
}

/// Goal value of a mesh-adaptive run with converged Newton iterations,
/// refined until the mesh has `max_dofs` degrees of freedom, corrected by
/// the error estimate on that mesh.
pub fn compute_reference_goal(cfg: &RunConfig, max_dofs: usize) -> Result<f64, DriverError> {
    let problem = cfg.problem.build()?;
    let ref_cfg = RunConfig {
        n_ref: usize::MAX,
        tol: Some(f64::MIN_POSITIVE),
        max_dofs,
        newton: NewtonConfig {
            damping: 1.0,
            ..cfg.newton
        },
        output: super::OutputConfig {
            dir: None,
            ..Default::default()
        },
        ..cfg.clone()
    };
    let mut sink = OutputSink::new(&ref_cfg.output)?;
    let res = run_problem(
        &*problem,
        &ref_cfg,
        Algorithm::MeshAdaptive,
        None,
        &mut sink,
    )?;
    let last = res.rows.last().expect("one level");
    Ok(last.goal + last.eta_total)
}

/// [`compute_reference_goal`] with the value stored in the system temporary
/// directory under a hash of the relevant configuration.
pub fn cached_reference_goal(cfg: &RunConfig, max_dofs: usize) -> Result<f64, DriverError> {
    use std::hash::{Hash, Hasher};
    let key = serde_json::to_string(&(
        "corrected",
        &cfg.problem,
        &cfg.newton,
        &cfg.marking,
        &cfg.ordering,
        max_dofs,
    ))
    .map_err(|e| DriverError::Config(e.to_string()))?;
    let mut h = std::collections::hash_map::DefaultHasher::new();
    key.hash(&mut h);
    let dir = std::env::temp_dir().join("adaptive-kkt");
    let path = dir.join(format!("reference-{:016x}.txt", h.finish()));
    if let Some(v) = std::fs::read_to_string(&path)
        .ok()
        .and_then(|t| t.trim().parse::<f64>().ok())
    {
        return Ok(v);
    }
    let v = compute_reference_goal(cfg, max_dofs)?;
    std::fs::create_dir_all(&dir)?;
    std::fs::write(&path, format!("{v:e}\n"))?;
    Ok(v)
}

/// One Newton iterate of [`iteration_study`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRow {
    pub step: usize,
    pub residual: f64,
    pub goal: f64,
    /// `ℐ(w_h) - ℐ(w̃_h)` against the converged discrete solution.
    pub iteration_error: f64,
    /// `ℐ_ref - ℐ(w̃_h)`
    pub total_error: f64,
    pub eta_h: f64,
    pub eta_kkt: f64,
    /// `η_KKT / iteration error`
    pub kkt_effectivity: f64,
    /// `(η_h + η_KKT) / total error`
    pub combined_effectivity: f64,
}

/// Newton iteration with a dual solve and estimate at every iterate on a
/// fixed mesh, compared with the converged discrete solution there.
pub fn iteration_study(
    problem: &dyn ProblemDefinition,
    mesh: &QuadMesh,
    newton: &NewtonConfig,
    reference: f64,
    ordering: Ordering,
) -> Result<Vec<IterationRow>, DriverError> {
    let mut disc = Discretization::new(problem, mesh);
    disc.ordering = ordering;
    let full = NewtonConfig {
        damping: 1.0,
        ..*newton
    };
    let (wh, _, _) = solve_to_tolerance(&disc, disc.initial_state(), &full, |_, _| {})?;
    let goal_h = disc.goal(&wh);
    let mut w = disc.initial_state();
    let mut rows = Vec::new();
    for step in 0..=newton.max_steps {
        let lin = linearize(&disc, &w)?;
        let z = lin.solve_dual(&disc, &w)?;
        let rep = estimate(&disc, &w, &z)?;
        let goal = disc.goal(&w);
        let it = goal_h - goal;
        let tot = reference - goal;
        rows.push(IterationRow {
            step,
            residual: lin.residual_norm,
            goal,
            iteration_error: it,
            total_error: tot,
            eta_h: rep.eta_h,
            eta_kkt: rep.eta_kkt,
            kkt_effectivity: rep.eta_kkt / it,
            combined_effectivity: rep.eta_total / tot,
        });
        if lin.residual_norm < newton.tol_kkt {
            break;
        }
        w = lin.update(&disc, &w, newton.damping)?.0;
    }
    Ok(rows)
}
