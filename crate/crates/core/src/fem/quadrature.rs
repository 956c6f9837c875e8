//! Gauss–Legendre rules on the unit interval and the unit square.

use super::FemError;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly per coordinate direction.
    pub degree: usize,
}

/// `n`-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a Gauss rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

impl QuadratureRule {
    /// `n × n` tensor Gauss rule on `[0, 1]²`.
    pub fn tensor(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                points.push([x[i], x[j]]);
                weights.push(w[i] * w[j]);
            }
        }
        Self {
            points,
            weights,
            degree: 2 * n - 1,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Composite Gauss rule on `[0, 1]` (points stored in the first coordinate).
#[derive(Clone, Debug, PartialEq)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    pub fn composite(n_points: usize, n_sub: usize) -> Self {
        let (x, w) = gauss_legendre(n_points);
        let h = 1.0 / n_sub as f64;
        let mut points = Vec::with_capacity(n_points * n_sub);
        let mut weights = Vec::with_capacity(n_points * n_sub);
        for s in 0..n_sub {
            for (xi, wi) in x.iter().zip(&w) {
                points.push((s as f64 + xi) * h);
                weights.push(wi * h);
            }
        }
        Self { points, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

const BOUNDARY_POINTS: usize = 4;
const MAX_DOUBLINGS: usize = 14;

/// Composite rule on a face, doubled until two successive levels agree on
/// `∫ f` to `rel_tol` (relative to `scale` when the integral itself is tiny).
pub fn boundary_quadrature(
    f: impl Fn(f64) -> f64,
    rel_tol: f64,
    scale: f64,
) -> Result<LineRule, FemError> {
    let mut n_sub = 1;
    let mut rule = LineRule::composite(BOUNDARY_POINTS, n_sub);
    let mut prev = rule.integrate(&f);
    for _ in 0..MAX_DOUBLINGS {
        n_sub *= 2;
        let next_rule = LineRule::composite(BOUNDARY_POINTS, n_sub);
        let next = next_rule.integrate(&f);
        let tol = rel_tol * next.abs().max(scale.abs());
        if (next - prev).abs() <= tol {
            // keep the coarser rule: it already agrees with its refinement
            return Ok(rule);
        }
        rule = next_rule;
        prev = next;
    }
    Err(FemError::QuadratureTooCoarse {
        subintervals: n_sub,
    })
}
