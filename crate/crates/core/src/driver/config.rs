use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::estimator::MarkStrategy;
use crate::kkt::NewtonConfig;
use crate::linalg::Ordering;
use crate::problems::{
    ElectrodeConfig, ElectrodeProblem, ProblemDefinition, ProblemError, SlitConfig, SlitProblem,
    SquareSource,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Slit(SlitConfig),
    Electrode(ElectrodeConfig),
    SquareSource(SquareSource),
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Box<dyn ProblemDefinition>, ProblemError> {
        Ok(match self {
            ProblemConfig::Slit(c) => Box::new(SlitProblem::new(c.clone())),
            ProblemConfig::Electrode(c) => Box::new(ElectrodeProblem::new(c.clone())?),
            ProblemConfig::SquareSource(c) => Box::new(c.clone()),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Newton to convergence, then global refinement.
    Global,
    /// Newton to convergence, then estimation and local refinement.
    #[default]
    MeshAdaptive,
    /// Newton steps only while the iteration error dominates.
    FullyAdaptive,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSpec {
    #[default]
    None,
    Value(f64),
    /// Mesh-adaptive run with converged Newton until `max_dofs`.
    Compute {
        max_dofs: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub vtk: bool,
    /// Dump the level-0 Hessian in MatrixMarket format.
    pub matrix_market: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            vtk: true,
            matrix_market: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    /// Global refinements of the initial mesh used for every half-step.
    pub refinements: usize,
    pub max_rounds: usize,
    /// Stop when `J` decreases by less than this, relative.
    pub rel_tol: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            refinements: 1,
            max_rounds: 20,
            rel_tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub algorithm: Algorithm,
    /// Refinement cycles after the initial mesh.
    pub n_ref: usize,
    /// Outer tolerance on `|η|`; `None` means `tol_rel · |η|` on the first
    /// level.
    pub tol: Option<f64>,
    pub tol_rel: f64,
    /// No further refinement once a level has this many dofs.
    pub max_dofs: usize,
    pub newton: NewtonConfig,
    /// Balancing constant of the fully adaptive algorithm.
    pub c_b: f64,
    pub marking: MarkStrategy,
    pub ordering: Ordering,
    pub reference: ReferenceSpec,
    pub design: DesignConfig,
    pub output: OutputConfig,
    /// Compare the localized estimate with the unlocalized weighted
    /// residual on every level.
    pub check_identity: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::Slit(SlitConfig::default()),
            algorithm: Algorithm::default(),
            n_ref: 6,
            tol: None,
            tol_rel: 1e-4,
            max_dofs: 200_000,
            newton: NewtonConfig::default(),
            c_b: 0.1,
            marking: MarkStrategy::default(),
            ordering: Ordering::default(),
            reference: ReferenceSpec::None,
            design: DesignConfig::default(),
            output: OutputConfig::default(),
            check_identity: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        let n = &self.newton;
        if !(self.c_b > 0.0 && self.c_b <= 1.0) {
            return Err(format!("c_b = {} outside (0, 1]", self.c_b));
        }
        if !(n.damping > 0.0 && n.damping <= 1.0) {
            return Err(format!("damping = {} outside (0, 1]", n.damping));
        }
        if !(n.tol_kkt > 0.0) || self.tol.is_some_and(|t| !(t > 0.0)) || !(self.tol_rel > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if !(self.marking.theta > 0.0 && self.marking.theta <= 1.0) {
            return Err(format!(
                "marking fraction {} outside (0, 1]",
                self.marking.theta
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }
}
