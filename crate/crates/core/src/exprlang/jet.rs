//! Second-order forward-mode jets.

use super::scalar::{builtin_derivs, Scalar};
use super::Builtin;
use serde::{Deserialize, Serialize};

/// Value, gradient and Hessian of a scalar at a point.
///
/// `hess` is stored dense row-major and kept exactly symmetric: every
/// operation computes the upper triangle and mirrors it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Jet2 {
    pub fn constant(n: usize, c: f64) -> Self {
        Jet2 { value: c, grad: vec![0.0; n], hess: vec![0.0; n * n] }
    }

    /// The coordinate function `x_i` at `x_i = v`.
    pub fn variable(n: usize, i: usize, v: f64) -> Self {
        let mut j = Jet2::constant(n, v);
        j.grad[i] = 1.0;
        j
    }

    /// Seed all coordinates of a point.
    pub fn seed(point: &[f64]) -> Vec<Jet2> {
        let n = point.len();
        point.iter().enumerate().map(|(i, &v)| Jet2::variable(n, i, v)).collect()
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.dim() + j]
    }

    fn build(value: f64, grad: Vec<f64>, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = grad.len();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                hess[i * n + j] = v;
                hess[j * n + i] = v;
            }
        }
        Jet2 { value, grad, hess }
    }

    /// Chain rule for `f(self)` given `f, f', f''` at the value.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let grad: Vec<f64> = self.grad.iter().map(|g| f1 * g).collect();
        Jet2::build(f0, grad, |i, j| f1 * self.h(i, j) + f2 * self.grad[i] * self.grad[j])
    }

    fn unary(&self, b: Builtin, value: f64) -> Self {
        let (_, d1, d2) = builtin_derivs(b, self.value);
        self.chain(value, d1, d2)
    }
}

impl Scalar for Jet2 {
    fn lift(&self, c: f64) -> Self {
        Jet2::constant(self.dim(), c)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn add(&self, o: &Self) -> Self {
        let grad = self.grad.iter().zip(&o.grad).map(|(a, b)| a + b).collect();
        Jet2::build(self.value + o.value, grad, |i, j| self.h(i, j) + o.h(i, j))
    }
    fn sub(&self, o: &Self) -> Self {
        let grad = self.grad.iter().zip(&o.grad).map(|(a, b)| a - b).collect();
        Jet2::build(self.value - o.value, grad, |i, j| self.h(i, j) - o.h(i, j))
    }
    fn mul(&self, o: &Self) -> Self {
        let (a, b) = (self.value, o.value);
        let grad = self.grad.iter().zip(&o.grad).map(|(ga, gb)| ga * b + a * gb).collect();
        Jet2::build(a * b, grad, |i, j| {
            self.h(i, j) * b + a * o.h(i, j) + self.grad[i] * o.grad[j] + self.grad[j] * o.grad[i]
        })
    }
    fn div(&self, o: &Self) -> Self {
        // q = a/b ; q' = (a' - q b')/b ; q'' = (a'' - q b'' - q'_i b'_j - q'_j b'_i)/b
        let q = self.value / o.value;
        let b = o.value;
        let grad: Vec<f64> = self.grad.iter().zip(&o.grad).map(|(ga, gb)| (ga - q * gb) / b).collect();
        let g2 = grad.clone();
        Jet2::build(q, grad, |i, j| {
            (self.h(i, j) - q * o.h(i, j) - g2[i] * o.grad[j] - g2[j] * o.grad[i]) / b
        })
    }
    fn neg(&self) -> Self {
        Jet2 {
            value: -self.value,
            grad: self.grad.iter().map(|g| -g).collect(),
            hess: self.hess.iter().map(|h| -h).collect(),
        }
    }
    fn scale(&self, c: f64) -> Self {
        Jet2 {
            value: c * self.value,
            grad: self.grad.iter().map(|g| c * g).collect(),
            hess: self.hess.iter().map(|h| c * h).collect(),
        }
    }
    fn sqrt(&self) -> Self {
        self.unary(Builtin::Sqrt, self.value.sqrt())
    }
    fn exp(&self) -> Self {
        self.unary(Builtin::Exp, self.value.exp())
    }
    fn ln(&self) -> Self {
        self.unary(Builtin::Ln, self.value.ln())
    }
    fn sin(&self) -> Self {
        self.unary(Builtin::Sin, self.value.sin())
    }
    fn cos(&self) -> Self {
        self.unary(Builtin::Cos, self.value.cos())
    }
    fn tan(&self) -> Self {
        self.unary(Builtin::Tan, self.value.tan())
    }
    fn atan(&self) -> Self {
        self.unary(Builtin::Arctan, self.value.atan())
    }
    fn all_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().all(|h| h.is_finite())
    }
}
