use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::estimator::EstimatorReport;
use crate::kkt::{DualState, KktState};
use crate::linalg::{write_matrix_market, SparseMatrix};
use crate::mesh::{write_vtk, QuadMesh};

use super::run::{ConvergenceRow, StepTrace};
use super::{DriverError, OutputConfig};

/// Writes `level_k.vtk`, `trace.log` and `convergence.csv` into the output
/// directory; does nothing without one.
pub struct OutputSink {
    dir: Option<PathBuf>,
    vtk: bool,
    trace: Option<BufWriter<File>>,
}

impl OutputSink {
    pub fn new(cfg: &OutputConfig) -> Result<Self, DriverError> {
        let trace = match &cfg.dir {
            Some(d) => {
                fs::create_dir_all(d)?;
                Some(BufWriter::new(File::create(d.join("trace.log"))?))
            }
            None => None,
        };
        Ok(Self {
            dir: cfg.dir.clone(),
            vtk: cfg.vtk,
            trace,
        })
    }

    pub fn disabled() -> Self {
        Self {
            dir: None,
            vtk: false,
            trace: None,
        }
    }

    pub fn matrix_market(&self, a: &SparseMatrix<f64>) -> Result<(), DriverError> {
        if let Some(d) = &self.dir {
            write_matrix_market(
                a,
                BufWriter::new(File::create(d.join("hessian_level_0.mtx"))?),
            )?;
        }
        Ok(())
    }

    pub fn level(
        &mut self,
        mesh: &QuadMesh,
        w: &KktState,
        z: &DualState,
        report: &EstimatorReport,
        row: &ConvergenceRow,
        steps: &[StepTrace],
    ) -> Result<(), DriverError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        if let Some(t) = &mut self.trace {
            for s in steps {
                write!(
                    t,
                    "level={} step={} dofs={} residual={:.6e}",
                    s.level, s.step, s.dofs, s.residual
                )?;
                if let (Some(h), Some(k)) = (s.eta_h, s.eta_kkt) {
                    write!(t, " eta_h={h:.6e} eta_kkt={k:.6e}")?;
                }
                writeln!(t, " time={:.3}", s.wall_time_s)?;
            }
            writeln!(
                t,
                "level={} done dofs={} goal={:.10e} eta={:.6e} steps={} factorizations={}",
                row.level, row.dofs, row.goal, row.eta_total, row.newton_steps, row.factorizations
            )?;
            t.flush()?;
        }
        if self.vtk {
            let indicator: Vec<f64> = report.per_cell.iter().map(|&(_, v)| v).collect();
            let file = File::create(dir.join(format!("level_{}.vtk", row.level)))?;
            write_vtk(
                mesh,
                &[
                    ("u", &w.u.values),
                    ("lambda", &w.lambda.values),
                    ("z_u", &z.u.values),
                    ("z_lambda", &z.lambda.values),
                ],
                &[("indicator", &indicator)],
                BufWriter::new(file),
            )?;
        }
        Ok(())
    }

    pub fn finish(&mut self, rows: &[ConvergenceRow]) -> Result<(), DriverError> {
        if let Some(d) = &self.dir {
            write_convergence_csv(rows, &d.join("convergence.csv"))?;
        }
        Ok(())
    }
}

pub fn write_convergence_csv(rows: &[ConvergenceRow], path: &Path) -> Result<(), DriverError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
