//! Scalar abstraction shared by the circuit model, the flux function and the
//! second-order jets.
//!
//! Anything that evaluates closed-form physics (resistances, currents, the
//! mollified hole flux) is written against [`Scalar`] so that the same code
//! path yields plain values (`f64`, `f32`) or values with first and second
//! derivatives ([`crate::problems::Jet2`]).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::Float;

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// Lift a constant.
    fn cst(v: f64) -> Self;

    /// Primal value as `f64` (derivative parts dropped).
    fn re(&self) -> f64;

    fn exp(self) -> Self;

    fn powi(self, n: i32) -> Self;

    fn recip(self) -> Self {
        Self::cst(1.0) / self
    }

    fn is_finite(&self) -> bool;
}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn cst(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn re(&self) -> f64 {
                *self as f64
            }
            #[inline]
            fn exp(self) -> Self {
                Float::exp(self)
            }
            #[inline]
            fn powi(self, n: i32) -> Self {
                Float::powi(self, n)
            }
            #[inline]
            fn is_finite(&self) -> bool {
                Float::is_finite(*self)
            }
        }
    };
}

impl_float_scalar!(f64);
impl_float_scalar!(f32);

#[cfg(test)]
mod tests {
    use super::*;

    fn cube<S: Scalar>(x: S) -> S {
        x * x * x
    }

    #[test]
    fn float_impls_agree() {
        assert_eq!(cube(2.0f64), 8.0);
        assert_eq!(cube(2.0f32), 8.0);
        assert_eq!(Scalar::powi(3.0f64, 3), 27.0);
        assert!((Scalar::recip(4.0f32) - 0.25).abs() < 1e-7);
    }
}
