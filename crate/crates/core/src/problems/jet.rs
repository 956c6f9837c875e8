//! Second-order forward-mode numbers.
//!
//! A [`Jet2`] carries a value together with its gradient and Hessian with
//! respect to `N` seeded parameters. Arithmetic propagates both orders exactly
//! by the product and chain rules, so any closed-form expression written
//! against [`Scalar`] yields exact first and second derivatives.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::Float;

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<T, const N: usize> {
    pub val: T,
    pub grad: [T; N],
    /// Symmetric; stored in full.
    pub hess: [[T; N]; N],
}

impl<T: Float, const N: usize> Jet2<T, N> {
    pub fn constant(val: T) -> Self {
        Self {
            val,
            grad: [T::zero(); N],
            hess: [[T::zero(); N]; N],
        }
    }

    /// Independent variable number `slot`.
    pub fn variable(val: T, slot: usize) -> Self {
        assert!(slot < N, "seed slot {slot} out of range for a {N}-jet");
        let mut j = Self::constant(val);
        j.grad[slot] = T::one();
        j
    }

    /// Apply a scalar function given its value and first two derivatives at
    /// `self.val`.
    #[inline]
    pub fn chain(&self, f: T, df: T, d2f: T) -> Self {
        let mut out = Self::constant(f);
        for i in 0..N {
            out.grad[i] = df * self.grad[i];
            for j in 0..N {
                out.hess[i][j] = df * self.hess[i][j] + d2f * self.grad[i] * self.grad[j];
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        out.val = out.val * s;
        for i in 0..N {
            out.grad[i] = out.grad[i] * s;
            for j in 0..N {
                out.hess[i][j] = out.hess[i][j] * s;
            }
        }
        out
    }
}

impl<T: Float, const N: usize> Add for Jet2<T, N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<T: Float, const N: usize> AddAssign for Jet2<T, N> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.val = self.val + rhs.val;
        for i in 0..N {
            self.grad[i] = self.grad[i] + rhs.grad[i];
            for j in 0..N {
                self.hess[i][j] = self.hess[i][j] + rhs.hess[i][j];
            }
        }
    }
}

impl<T: Float, const N: usize> Sub for Jet2<T, N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<T: Float, const N: usize> SubAssign for Jet2<T, N> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.val = self.val - rhs.val;
        for i in 0..N {
            self.grad[i] = self.grad[i] - rhs.grad[i];
            for j in 0..N {
                self.hess[i][j] = self.hess[i][j] - rhs.hess[i][j];
            }
        }
    }
}

impl<T: Float, const N: usize> Neg for Jet2<T, N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Float, const N: usize> Mul for Jet2<T, N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::constant(self.val * rhs.val);
        for i in 0..N {
            out.grad[i] = self.grad[i] * rhs.val + self.val * rhs.grad[i];
            for j in 0..N {
                out.hess[i][j] = self.hess[i][j] * rhs.val
                    + self.val * rhs.hess[i][j]
                    + self.grad[i] * rhs.grad[j]
                    + rhs.grad[i] * self.grad[j];
            }
        }
        out
    }
}

impl<T: Float, const N: usize> MulAssign for Jet2<T, N> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<T: Float, const N: usize> Div for Jet2<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip_jet()
    }
}

impl<T: Float, const N: usize> Jet2<T, N> {
    #[inline]
    fn recip_jet(&self) -> Self {
        let r = self.val.recip();
        let two = T::one() + T::one();
        self.chain(r, -r * r, two * r * r * r)
    }
}

impl<T: Float + std::fmt::Debug, const N: usize> Scalar for Jet2<T, N> {
    #[inline]
    fn cst(v: f64) -> Self {
        Self::constant(T::from(v).expect("constant representable in the base type"))
    }

    #[inline]
    fn re(&self) -> f64 {
        self.val.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.chain(e, e, e)
    }

    #[inline]
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(T::one());
        }
        let nf = T::from(n).unwrap();
        let f = self.val.powi(n);
        let df = nf * self.val.powi(n - 1);
        let d2f = if n == 1 {
            T::zero()
        } else {
            nf * (nf - T::one()) * self.val.powi(n - 2)
        };
        self.chain(f, df, d2f)
    }

    #[inline]
    fn recip(self) -> Self {
        self.recip_jet()
    }

    fn is_finite(&self) -> bool {
        self.val.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().flatten().all(|h| h.is_finite())
    }
}
