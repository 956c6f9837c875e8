//! Top-level algorithms, configuration, reference values, the alternating
//! electrode design loop and file output.

mod config;
mod design;
mod output;
mod run;

pub use config::{Algorithm, DesignConfig, OutputConfig, ProblemConfig, ReferenceSpec, RunConfig};
pub use design::{run_alternating_design, DesignRow};
pub use output::{write_convergence_csv, OutputSink};
pub use run::{
    cached_reference_goal, compute_reference_goal, iteration_study, run, run_fully_adaptive,
    run_global, run_mesh_adaptive, solve_to_tolerance, ConvergenceRow, IterationRow, RunResult,
    StepTrace,
};

use thiserror::Error;

use crate::estimator::EstimatorError;
use crate::kkt::KktError;
use crate::mesh::MeshError;
use crate::problems::ProblemError;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Kkt(#[from] KktError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
