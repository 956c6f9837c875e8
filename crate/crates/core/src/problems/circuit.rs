//! Resistor network of the pipette: currents leaving the tip opening and the
//! side holes for a fixed applied current.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::ProblemError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    /// Conductivity of the electrolyte.
    pub sigma: f64,
    /// Inclination of the pipette walls, degrees.
    pub theta_deg: f64,
    /// Wall thickness.
    pub d: f64,
    /// Tip opening size.
    pub s0: f64,
    /// Applied current.
    pub i_bar: f64,
    /// Mollifier exponent of the hole flux.
    pub beta: u32,
    pub y_tip: f64,
    pub y_up: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            sigma: 1.72,
            theta_deg: 22.0,
            d: 0.5,
            s0: 1.5,
            i_bar: 50.0,
            beta: 2,
            y_tip: 20.0,
            y_up: 60.0,
        }
    }
}

impl CircuitParams {
    pub fn validate(&self) -> Result<(), ProblemError> {
        let positive = [self.sigma, self.d, self.s0, self.i_bar];
        if positive.iter().any(|v| !(*v > 0.0))
            || !(self.theta_deg > 0.0 && self.theta_deg < 45.0)
            || self.beta < 1
            || !(self.y_up > self.y_tip)
        {
            return Err(ProblemError::DegenerateGeometry(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        1.0 / self.sigma
    }
}

/// Hole positions (height above the tip) and sizes, one entry per pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignVector {
    pub m: Vec<f64>,
    pub s: Vec<f64>,
    #[serde(default)]
    pub free_m: Vec<bool>,
    #[serde(default)]
    pub free_s: Vec<bool>,
}

impl DesignVector {
    pub fn fixed(m: Vec<f64>, s: Vec<f64>) -> Self {
        let n = m.len();
        Self {
            m,
            s,
            free_m: vec![false; n],
            free_s: vec![false; n],
        }
    }

    pub fn pairs(&self) -> usize {
        self.m.len()
    }

    pub fn is_free_m(&self, k: usize) -> bool {
        self.free_m.get(k).copied().unwrap_or(false)
    }

    pub fn is_free_s(&self, k: usize) -> bool {
        self.free_s.get(k).copied().unwrap_or(false)
    }

    /// Free entries in the order m_1.., s_1...
    pub fn free_values(&self) -> Vec<f64> {
        let mut q = Vec::new();
        for k in 0..self.pairs() {
            if self.is_free_m(k) {
                q.push(self.m[k]);
            }
        }
        for k in 0..self.pairs() {
            if self.is_free_s(k) {
                q.push(self.s[k]);
            }
        }
        q
    }

    /// Copy with the free entries replaced by `q`.
    pub fn with_free_values(&self, q: &[f64]) -> Self {
        let mut out = self.clone();
        let mut it = q.iter().copied();
        for k in 0..self.pairs() {
            if self.is_free_m(k) {
                out.m[k] = it.next().expect("control vector too short");
            }
        }
        for k in 0..self.pairs() {
            if self.is_free_s(k) {
                out.s[k] = it.next().expect("control vector too short");
            }
        }
        out
    }

    pub fn n_free(&self) -> usize {
        (0..self.pairs())
            .map(|k| self.is_free_m(k) as usize + self.is_free_s(k) as usize)
            .sum()
    }

    /// Violated admissibility conditions (holes inside the wall span and not
    /// overlapping), as messages.
    pub fn admissibility_warnings(&self, p: &CircuitParams) -> Vec<String> {
        let mut w = Vec::new();
        let top = p.y_up - p.y_tip;
        for k in 0..self.pairs() {
            let (m, s) = (self.m[k], self.s[k]);
            if !(s < m && m < top - s) {
                w.push(format!(
                    "hole pair {} at m={m:.4}, s={s:.4} leaves the wall span",
                    k + 1
                ));
            }
            if k + 1 < self.pairs() && !(m + s < self.m[k + 1] - self.s[k + 1]) {
                w.push(format!("hole pairs {} and {} overlap", k + 1, k + 2));
            }
        }
        w
    }
}

/// Admissible set as linear inequalities `a · q ≤ b` in the free entries
/// (ordered as in [`DesignVector::free_values`]): every hole at least
/// `margin` inside the wall span, pairs at least `margin` apart, sizes at
/// least `margin`. Rows without free entries are dropped.
pub fn admissible_constraints(
    design: &DesignVector,
    p: &CircuitParams,
    margin: f64,
) -> Vec<(Vec<f64>, f64)> {
    let n = design.pairs();
    let top = p.y_up - p.y_tip;
    // full rows over (m_1.., s_1..)
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let unit = |pairs: &[(usize, f64)]| {
        let mut a = vec![0.0; 2 * n];
        for &(i, v) in pairs {
            a[i] += v;
        }
        a
    };
    for k in 0..n {
        rows.push((unit(&[(n + k, 1.0), (k, -1.0)]), -margin));
        rows.push((unit(&[(k, 1.0), (n + k, 1.0)]), top - margin));
        rows.push((unit(&[(n + k, -1.0)]), -margin));
        if k + 1 < n {
            rows.push((
                unit(&[(k, 1.0), (n + k, 1.0), (k + 1, -1.0), (n + k + 1, 1.0)]),
                -margin,
            ));
        }
    }
    let free: Vec<bool> = (0..n)
        .map(|k| design.is_free_m(k))
        .chain((0..n).map(|k| design.is_free_s(k)))
        .collect();
    let values: Vec<f64> = design.m.iter().chain(&design.s).copied().collect();
    rows.into_iter()
        .filter_map(|(a, b)| {
            let fixed: f64 = (0..2 * n)
                .filter(|&i| !free[i])
                .map(|i| a[i] * values[i])
                .sum();
            let af: Vec<f64> = (0..2 * n).filter(|&i| free[i]).map(|i| a[i]).collect();
            af.iter().any(|v| *v != 0.0).then(|| (af, b - fixed))
        })
        .collect()
}

/// Resistances of the network.
#[derive(Clone, Copy, Debug)]
pub struct Resistances<S> {
    /// Cone between tip and first hole pair.
    pub r0: S,
    /// One hole of pair 1.
    pub r1: S,
    /// One hole of pair 2.
    pub r2: S,
    /// Cone between hole pairs 1 and 2.
    pub r3: S,
}

fn cone<S: Scalar>(p: &CircuitParams, lo: S, hi: S) -> S {
    let t = p.theta_deg.to_radians().tan();
    let c = S::cst(p.rho() / std::f64::consts::PI / t);
    let s0 = S::cst(p.s0);
    let tt = S::cst(t);
    c * ((s0 + lo * tt).recip() - (s0 + hi * tt).recip())
}

fn hole<S: Scalar>(p: &CircuitParams, s: S) -> S {
    S::cst(p.rho() * p.d / std::f64::consts::PI) / (s * s)
}

pub fn resistances<S: Scalar>(p: &CircuitParams, m: &[S], s: &[S]) -> Resistances<S> {
    let zero = S::cst(0.0);
    let nan = S::cst(f64::NAN);
    let r0 = if m.is_empty() {
        nan
    } else {
        cone(p, zero, m[0])
    };
    let r1 = if s.is_empty() { nan } else { hole(p, s[0]) };
    let r2 = if s.len() < 2 { nan } else { hole(p, s[1]) };
    let r3 = if m.len() < 2 {
        nan
    } else {
        cone(p, m[0], m[1])
    };
    Resistances { r0, r1, r2, r3 }
}

/// Currents `[I_0, I_1, ..]` through the tip opening and through one hole of
/// each pair, for 0, 1 or 2 pairs.
pub fn circuit_currents<S: Scalar>(
    p: &CircuitParams,
    m: &[S],
    s: &[S],
) -> Result<Vec<S>, ProblemError> {
    p.validate()?;
    let ib = S::cst(p.i_bar);
    let two = S::cst(2.0);
    let out = match m.len() {
        0 => vec![ib],
        1 => {
            let r = resistances(p, m, s);
            let den = r.r1 + two * r.r0;
            vec![ib * r.r1 / den, ib * r.r0 / den]
        }
        2 => {
            let r = resistances(p, m, s);
            let r013 = r.r3 + (r.r0.recip() + two * r.r1.recip()).recip();
            let den = r.r2 + two * r013;
            let i2 = ib * r013 / den;
            let i3 = ib * r.r2 / den;
            let den01 = r.r1 + two * r.r0;
            vec![i3 * r.r1 / den01, i3 * r.r0 / den01, i2]
        }
        n => {
            return Err(ProblemError::Unsupported(format!(
                "circuit model covers at most two hole pairs, got {n}"
            )))
        }
    };
    if out.iter().any(|i| !i.is_finite()) || s.len() != m.len() {
        return Err(ProblemError::DegenerateGeometry(format!(
            "non-finite current for m={:?}, s={:?}",
            m.iter().map(|x| x.re()).collect::<Vec<_>>(),
            s.iter().map(|x| x.re()).collect::<Vec<_>>()
        )));
    }
    Ok(out)
}

/// Current densities `J_k = I_k / s_k` (tip first).
pub fn current_densities<S: Scalar>(
    p: &CircuitParams,
    m: &[S],
    s: &[S],
) -> Result<Vec<S>, ProblemError> {
    let i = circuit_currents(p, m, s)?;
    let mut j = Vec::with_capacity(i.len());
    j.push(i[0] / S::cst(p.s0));
    for k in 1..i.len() {
        j.push(i[k] / s[k - 1]);
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Jet2;
    use proptest::prelude::*;

    fn default_design() -> (CircuitParams, [f64; 2], [f64; 2]) {
        (CircuitParams::default(), [10.0, 20.0], [1.0, 2.0])
    }

    /// Two successive 2x2 solves of the Ohm/Kirchhoff relations by Cramer's
    /// rule.
    fn oracle(p: &CircuitParams, m: [f64; 2], s: [f64; 2]) -> [f64; 3] {
        let r = resistances(p, &m, &s);
        let r013 = r.r3 + 1.0 / (1.0 / r.r0 + 2.0 / r.r1);
        // I2 R2 - I3 R013 = 0, 2 I2 + I3 = Ī
        let solve = |a: [[f64; 2]; 2], b: [f64; 2]| {
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            [
                (b[0] * a[1][1] - a[0][1] * b[1]) / det,
                (a[0][0] * b[1] - b[0] * a[1][0]) / det,
            ]
        };
        let [i2, i3] = solve([[r.r2, -r013], [2.0, 1.0]], [0.0, p.i_bar]);
        // R0 I0 - R1 I1 = 0, I0 + 2 I1 = I3
        let [i0, i1] = solve([[r.r0, -r.r1], [1.0, 2.0]], [0.0, i3]);
        [i0, i1, i2]
    }

    /// Closed forms over the common denominator polynomial.
    fn polynomial_form(p: &CircuitParams, m: [f64; 2], s: [f64; 2]) -> [f64; 3] {
        let c = 1.0 / p.theta_deg.to_radians().tan();
        let (s0, d, ib) = (p.s0, p.d, p.i_bar);
        let [m1, m2] = m;
        let [s1, s2] = s;
        let t = s0.powi(4) * c.powi(3) * d * d
            + 2.0 * s0.powi(3) * c * c * d * d * m1
            + 2.0 * d * s0 * s0 * c.powi(3) * m1 * s1 * s1
            + s0.powi(3) * c * c * m2 * d * d
            + 2.0 * s0 * s0 * c * m2 * d * d * m1
            + 2.0 * d * s0 * c * c * m2 * m1 * s1 * s1
            + m1 * m1 * s0 * s0 * c * d * d
            + 2.0 * d * m1 * m1 * s0 * c * c * s1 * s1
            + m1 * m1 * m2 * d * d * s0
            + 2.0 * d * m1 * m1 * m2 * c * s1 * s1
            + 2.0 * c.powi(3) * s2 * s2 * m2 * d * s0 * s0
            + 4.0 * c * c * s2 * s2 * m2 * d * s0 * m1
            + 4.0 * c.powi(3) * s2 * s2 * m2 * m1 * s1 * s1
            - 4.0 * c.powi(3) * s2 * s2 * m1 * m1 * s1 * s1
            + 2.0 * c * m1 * m1 * d * s2 * s2 * m2;
        let i0 = ib * (s0 * c + m1).powi(2) * (s0 * c + m2) * d * d * s0 / t;
        let i1 = ib * (s0 * c + m1) * (s0 * c + m2) * d * c * m1 * s1 * s1 / t;
        let i2 = ib
            * (m2 * d * s0 * s0 * c * c
                + 2.0 * c * m2 * d * s0 * m1
                + 2.0 * m2 * s1 * s1 * c * c * m1
                - 2.0 * s1 * s1 * c * c * m1 * m1
                + d * m1 * m1 * m2)
            * c
            * s2
            * s2
            / t;
        [i0, i1, i2]
    }

    #[test]
    fn default_geometry_triple() {
        let (p, m, s) = default_design();
        let i = circuit_currents(&p, &m, &s).unwrap();
        let o = oracle(&p, m, s);
        let poly = polynomial_form(&p, m, s);
        for k in 0..3 {
            assert!((i[k] - o[k]).abs() <= 1e-12 * o[k].abs());
            assert!((i[k] - poly[k]).abs() <= 1e-12 * o[k].abs());
        }
        assert!((i[0] - 1.17399306647472).abs() < 1e-12);
        assert!((i[1] - 2.82536099491201).abs() < 1e-12);
        assert!((i[2] - 21.5876424718506).abs() < 1e-11);
        assert!((i[0] + 2.0 * i[1] + 2.0 * i[2] - p.i_bar).abs() <= 1e-13 * p.i_bar);
    }

    #[test]
    fn closing_a_hole_redirects_current() {
        let (p, m, _) = default_design();
        let i = circuit_currents(&p, &m, &[1e-9, 2.0]).unwrap();
        assert!(i[1] < 1e-9);
        let reduced = circuit_currents(&p, &[m[1]], &[2.0]).unwrap();
        assert!((i[0] - reduced[0]).abs() < 1e-6 * reduced[0]);
        assert!((i[2] - reduced[1]).abs() < 1e-6 * reduced[1]);
    }

    #[test]
    fn fewer_pairs() {
        let p = CircuitParams::default();
        assert_eq!(circuit_currents::<f64>(&p, &[], &[]).unwrap(), vec![50.0]);
        let i = circuit_currents(&p, &[8.0f64], &[1.0]).unwrap();
        assert!((i[0] + 2.0 * i[1] - 50.0).abs() < 1e-13 * 50.0);
        let r = resistances(&p, &[8.0f64], &[1.0]);
        assert!((i[1] / i[0] - r.r0 / r.r1).abs() < 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        let p = CircuitParams {
            theta_deg: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            circuit_currents(&p, &[10.0], &[1.0]),
            Err(ProblemError::DegenerateGeometry(_))
        ));
        let q = CircuitParams::default();
        assert!(circuit_currents(&q, &[10.0], &[0.0]).is_err());
    }

    #[test]
    fn jets_match_central_differences() {
        type J = Jet2<f64, 4>;
        let (p, m, s) = default_design();
        let vars = [m[0], m[1], s[0], s[1]];
        let jet = |v: [f64; 4]| {
            let jm = [J::variable(v[0], 0), J::variable(v[1], 1)];
            let js = [J::variable(v[2], 2), J::variable(v[3], 3)];
            current_densities(&p, &jm, &js).unwrap()
        };
        let plain = |v: [f64; 4]| current_densities(&p, &v[..2], &v[2..]).unwrap();
        let j0 = jet(vars);
        let h = 1e-4;
        for a in 0..4 {
            let mut vp = vars;
            let mut vm = vars;
            vp[a] += h;
            vm[a] -= h;
            let (fp, fm) = (plain(vp), plain(vm));
            let (gp, gm) = (jet(vp), jet(vm));
            for k in 0..3 {
                let fd = (fp[k] - fm[k]) / (2.0 * h);
                let g = j0[k].grad[a];
                assert!(
                    (fd - g).abs() <= 1e-6 * g.abs().max(1e-3),
                    "dJ{k}/dv{a}: {fd} vs {g}"
                );
                for b in 0..4 {
                    let fd2 = (gp[k].grad[b] - gm[k].grad[b]) / (2.0 * h);
                    let hh = j0[k].hess[a][b];
                    assert!(
                        (fd2 - hh).abs() <= 1e-4 * hh.abs().max(1e-2),
                        "d2J{k}: {fd2} vs {hh}"
                    );
                }
            }
        }
    }

    #[test]
    fn constraints_match_admissibility() {
        let p = CircuitParams::default();
        let mut d = DesignVector::fixed(vec![10.0, 20.0], vec![1.0, 2.0]);
        d.free_m = vec![true, true];
        let cons = admissible_constraints(&d, &p, 0.0);
        // s_k < m_k, m_k + s_k < top, overlap
        assert_eq!(cons.len(), 5);
        let ok = |q: &[f64]| {
            cons.iter()
                .all(|(a, b)| a.iter().zip(q).map(|(x, y)| x * y).sum::<f64>() < *b)
        };
        for q in [
            [10.0, 20.0],
            [0.5, 20.0],
            [10.0, 12.5],
            [10.0, 38.5],
            [3.0, 7.0],
        ] {
            let w = d.with_free_values(&q).admissibility_warnings(&p);
            assert_eq!(ok(&q), w.is_empty(), "{q:?}: {w:?}");
        }
        d.free_m = vec![false, false];
        d.free_s = vec![true, true];
        assert_eq!(admissible_constraints(&d, &p, 0.0).len(), 7);
    }

    #[test]
    fn r0_grows_as_tip_shrinks() {
        let mut p = CircuitParams::default();
        let mut last = 0.0;
        for s0 in [2.0, 1.5, 1.0, 0.5] {
            p.s0 = s0;
            let r = resistances(&p, &[10.0], &[1.0]).r0;
            assert!(r > last);
            last = r;
        }
    }

    proptest! {
        #[test]
        fn closed_form_equals_circuit_solve(
            m1 in 1.5f64..15.0, gap in 0.5f64..20.0,
            s1 in 0.1f64..1.4, s2 in 0.1f64..3.0,
        ) {
            let p = CircuitParams::default();
            let m = [m1, m1 + s1 + gap + s2];
            let s = [s1, s2];
            let i = circuit_currents(&p, &m, &s).unwrap();
            let o = oracle(&p, m, s);
            for k in 0..3 {
                prop_assert!((i[k] - o[k]).abs() <= 1e-12 * o[k].abs());
            }
            prop_assert!((i[0] + 2.0 * i[1] + 2.0 * i[2] - p.i_bar).abs() <= 1e-13 * p.i_bar);
        }
    }
}
