//! Numeric abstraction shared by plain reals, second-order jets and
//! truncated Taylor series.
//!
//! Every implementation must compute the value part with exactly the same
//! IEEE operation as the `f64` implementation, so that evaluating an
//! expression through any carrier yields bit-identical values.

use std::fmt::Debug;

/// Field-like carrier for expression evaluation.
pub trait Scalar: Clone + Debug + Send + Sync {
    /// A constant with the same shape (dimension, order) as `self`.
    fn lift(&self, c: f64) -> Self;
    fn value(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Multiplication by a real constant.
    fn scale(&self, c: f64) -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn atan(&self) -> Self;
    /// True when every stored component is finite.
    fn all_finite(&self) -> bool;

    /// Integer power by binary exponentiation; negative powers divide.
    fn powi(&self, k: i64) -> Self {
        let one = self.lift(1.0);
        if k == 0 {
            return one;
        }
        let mut base = self.clone();
        let mut e = k.unsigned_abs();
        let mut acc: Option<Self> = None;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        let p = acc.unwrap_or(one.clone());
        if k < 0 {
            one.div(&p)
        } else {
            p
        }
    }
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, c: f64) -> Self {
        c * self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn atan(&self) -> Self {
        f64::atan(*self)
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

/// Value, first and second derivative of a builtin at `x`.
pub(crate) fn builtin_derivs(name: crate::exprlang::Builtin, x: f64) -> (f64, f64, f64) {
    use crate::exprlang::Builtin::*;
    match name {
        Sqrt => {
            let s = x.sqrt();
            (s, 0.5 / s, -0.25 / (s * x))
        }
        Exp => {
            let e = x.exp();
            (e, e, e)
        }
        Ln => (x.ln(), 1.0 / x, -1.0 / (x * x)),
        Sin => {
            let (s, c) = (x.sin(), x.cos());
            (s, c, -s)
        }
        Cos => {
            let (s, c) = (x.sin(), x.cos());
            (c, -s, -c)
        }
        Tan => {
            let t = x.tan();
            let sec2 = 1.0 + t * t;
            (t, sec2, 2.0 * t * sec2)
        }
        Arctan => {
            let d = 1.0 / (1.0 + x * x);
            (x.atan(), d, -2.0 * x * d * d)
        }
    }
}
