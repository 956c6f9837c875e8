use serde::Serialize;

use crate::kkt::{minimize_reduced_within, Discretization, KktState};
use crate::mesh::QuadMesh;
use crate::problems::{
    admissible_constraints, DesignVector, ElectrodeConfig, ElectrodeProblem, ProblemDefinition,
};

use super::{DriverError, ProblemConfig, RunConfig};

/// Minimal clearance of holes from the wall ends and from each other.
const ADMISSIBLE_MARGIN: f64 = 1e-3;

/// State after one half-step of the alternating design loop.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignRow {
    pub round: usize,
    /// `"positions"`, `"sizes"` or `"fixed"`.
    pub phase: &'static str,
    pub m: Vec<f64>,
    pub s: Vec<f64>,
    pub cost: f64,
    pub goal: f64,
    pub newton_steps: usize,
    pub converged: bool,
    /// Violated placement conditions of the design, if any.
    pub warnings: Vec<String>,
}

/// Alternate between optimizing hole positions with sizes fixed and sizes
/// with positions fixed on one mesh, until `J` stalls. Each half-step is a
/// globalized Newton iteration in the free design entries, kept inside the
/// admissible set.
pub fn run_alternating_design(cfg: &RunConfig) -> Result<Vec<DesignRow>, DriverError> {
    cfg.validate().map_err(DriverError::Config)?;
    let ProblemConfig::Electrode(base) = &cfg.problem else {
        return Err(DriverError::Config(
            "design loop needs an electrode problem".into(),
        ));
    };
    let mut mesh: QuadMesh = ElectrodeProblem::new(base.clone())?.initial_mesh()?;
    for _ in 0..cfg.design.refinements {
        mesh = mesh.refine_global();
    }
    let pairs = base.design.pairs();
    let mut design = base.design.clone();
    let mut rows = Vec::new();
    let mut warm: Option<KktState> = None;

    let half_step =
        |design: &DesignVector, round: usize, phase: &'static str, warm: &mut Option<KktState>| {
            let problem = ElectrodeProblem::new(ElectrodeConfig {
                design: design.clone(),
                ..base.clone()
            })?;
            let mut disc = Discretization::new(&problem, &mesh);
            disc.ordering = cfg.ordering;
            let q0 = problem.initial_control();
            let w0 = match warm.take() {
                Some(prev) => KktState { q: q0, ..prev },
                None => disc.state_with_control(q0),
            };
            let cons = admissible_constraints(design, &problem.circuit, ADMISSIBLE_MARGIN);
            let out = minimize_reduced_within(&disc, w0, &cfg.newton, &cons)?;
            let next = problem.design_at(&out.state.q);
            let row = DesignRow {
                round,
                phase,
                m: next.m.clone(),
                s: next.s.clone(),
                cost: out.cost,
                goal: disc.goal(&out.state),
                newton_steps: out.steps,
                converged: out.converged,
                warnings: next.admissibility_warnings(&problem.circuit),
            };
            *warm = Some(out.state);
            Ok::<_, DriverError>((next, row))
        };

    if pairs == 0 {
        let (_, row) = half_step(&design, 0, "fixed", &mut warm)?;
        rows.push(row);
        return Ok(rows);
    }
    let mut previous = f64::INFINITY;
    for round in 1..=cfg.design.max_rounds {
        for (phase, positions) in [("positions", true), ("sizes", false)] {
            design.free_m = vec![positions; pairs];
            design.free_s = vec![!positions; pairs];
            let (next, row) = half_step(&design, round, phase, &mut warm)?;
            design = next;
            rows.push(row);
        }
        let cost = rows.last().expect("two rows per round").cost;
        if previous.is_finite()
            && (previous - cost) / previous.abs().max(f64::MIN_POSITIVE) < cfg.design.rel_tol
        {
            break;
        }
        previous = cost;
    }
    Ok(rows)
}
