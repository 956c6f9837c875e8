use serde::{Deserialize, Serialize};

use crate::linalg::{factorize_with, Factorization};

use super::{Discretization, DualState, KktError, KktState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    /// Damping `α_N ∈ (0, 1]`.
    pub damping: f64,
    /// Residual tolerance.
    pub tol_kkt: f64,
    pub max_steps: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            damping: 1.0,
            tol_kkt: 1e-10,
            max_steps: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub residual_before: f64,
    pub residual_after: f64,
    pub step_norm: f64,
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Residual and factorized Hessian at one iterate. Serves both the Newton
/// step from that iterate and the dual solve there.
pub struct Linearization {
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    factorization: Factorization<f64>,
}

pub fn linearize(disc: &Discretization<'_>, w: &KktState) -> Result<Linearization, KktError> {
    let (residual, h) = disc.residual_and_hessian(w)?;
    let factorization = factorize_with(&h, disc.ordering)?;
    disc.count_factorization();
    Ok(Linearization {
        residual_norm: norm(&residual),
        residual,
        factorization,
    })
}

impl Linearization {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, KktError> {
        Ok(self.factorization.solve(b)?)
    }

    /// `Δw` with `H Δw = -ρ`.
    pub fn direction(&self) -> Result<Vec<f64>, KktError> {
        let rhs: Vec<f64> = self.residual.iter().map(|r| -r).collect();
        self.solve(&rhs)
    }

    /// `w + α_N Δw`
    pub fn update(
        &self,
        disc: &Discretization<'_>,
        w: &KktState,
        damping: f64,
    ) -> Result<(KktState, f64), KktError> {
        let dw = self.direction()?;
        let mut x = disc.to_vector(w);
        for (xi, di) in x.iter_mut().zip(&dw) {
            *xi += damping * di;
        }
        Ok((disc.from_vector(&x), norm(&dw)))
    }

    /// `z` with `H z = -ζ(w)`, `ζ` the goal derivative.
    pub fn solve_dual(
        &self,
        disc: &Discretization<'_>,
        w: &KktState,
    ) -> Result<DualState, KktError> {
        let rhs: Vec<f64> = disc.goal_rhs(w).iter().map(|r| -r).collect();
        Ok(disc.from_vector(&self.solve(&rhs)?))
    }
}

/// One damped Newton step from `w`.
pub fn newton_step(
    disc: &Discretization<'_>,
    w: &KktState,
    cfg: &NewtonConfig,
) -> Result<(KktState, StepReport), KktError> {
    let lin = linearize(disc, w)?;
    let (next, step_norm) = lin.update(disc, w, cfg.damping)?;
    let residual_after = norm(&disc.residual(&next)?);
    Ok((
        next,
        StepReport {
            residual_before: lin.residual_norm,
            residual_after,
            step_norm,
        },
    ))
}
