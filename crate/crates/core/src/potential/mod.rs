//! Potentials of verified candidates: `η` from `β`, the flux `f` from
//! `λ`, the entropy flux `q`, and a marching solver for rich frames in
//! Riemann coordinates.
//!
//! Matrix fields are Jacobians with rows as gradients: `M[i][j] = ∂_j Ψ^i`.

mod darboux;
mod export;
mod gauge;
mod quad;
mod staircase;

pub use darboux::{solve_rich_beta, BoundaryFn, DarbouxGrid, DarbouxSolution};
pub use export::{write_csv, write_json};
pub use gauge::{affine_gauge_compare, affine_gauge_compare_values};
pub use quad::{integrate, QuadStats, RULE_NAME};
pub use staircase::{
    entropy_flux, integrate_jacobian, reconstruct_eta, reconstruct_flux, GridSpec, PotentialGrid, QuadratureInfo,
    StaircaseOptions,
};

use crate::exprlang::{eval_scalar, eval_taylor, Expr, ExprError, Params, Scalar, Taylor};
use crate::geometry::{FrameSpec, GeometryError};
use crate::systems::{BetaCandidate, LambdaCandidate, SystemsError};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Systems(#[from] SystemsError),
    #[error("field is not curl-free at {point:?} (residual {residual:e})")]
    CurlViolation { point: Vec<f64>, residual: f64 },
    #[error("Jacobian is not symmetric (residual {residual:e})")]
    SymmetryViolation { residual: f64 },
    #[error("quadrature failed on [{a}, {b}] (error estimate {error:e})")]
    QuadratureFailure { a: f64, b: f64, error: f64 },
    #[error("frame is not rich")]
    NotRich,
    #[error("β-system has algebraic rank {0}, expected 0")]
    NotRankZero(usize),
    #[error("march failed: {0}")]
    StepFailure(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug)]
enum Kind {
    Explicit { entries: Vec<Vec<Expr>>, params: Params },
    /// `Lᵀ diag(β) L`
    Hessian { spec: FrameSpec, beta: BetaCandidate },
    /// `R diag(λ) L`
    Jacobian { spec: FrameSpec, lambda: LambdaCandidate },
}

/// An `n × n` matrix field that can be evaluated with first derivatives.
#[derive(Clone, Debug)]
pub struct MatrixField {
    pub n: usize,
    kind: Kind,
}

impl MatrixField {
    pub fn explicit(entries: Vec<Vec<Expr>>, params: Params) -> Result<Self, PotentialError> {
        let n = entries.len();
        if entries.iter().any(|r| r.len() != n) {
            return Err(PotentialError::Invalid("matrix field must be square".into()));
        }
        Ok(MatrixField { n, kind: Kind::Explicit { entries, params } })
    }

    pub fn hessian(spec: &FrameSpec, beta: &BetaCandidate) -> Result<Self, PotentialError> {
        check_len(spec.n, beta.beta.len())?;
        Ok(MatrixField { n: spec.n, kind: Kind::Hessian { spec: spec.clone(), beta: beta.clone() } })
    }

    pub fn jacobian(spec: &FrameSpec, lambda: &LambdaCandidate) -> Result<Self, PotentialError> {
        check_len(spec.n, lambda.lambda.len())?;
        Ok(MatrixField { n: spec.n, kind: Kind::Jacobian { spec: spec.clone(), lambda: lambda.clone() } })
    }

    pub fn identity(n: usize) -> Self {
        let entries = (0..n).map(|i| (0..n).map(|j| Expr::Num(if i == j { 1.0 } else { 0.0 })).collect()).collect();
        MatrixField { n, kind: Kind::Explicit { entries, params: Params::new() } }
    }

    /// Values at `p`.
    pub fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>, PotentialError> {
        let n = self.n;
        match &self.kind {
            Kind::Explicit { entries, params } => {
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] = eval_scalar(&entries[i][j], p, params)?;
                    }
                }
                Ok(m)
            }
            Kind::Hessian { spec, beta } => {
                let (_, l) = frame_values(spec, p)?;
                let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(beta.values(p)?));
                Ok(l.transpose() * d * l)
            }
            Kind::Jacobian { spec, lambda } => {
                let (r, l) = frame_values(spec, p)?;
                let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda.values(p)?));
                Ok(r * d * l)
            }
        }
    }

    /// Entries as first-order Taylor series at `p`.
    pub fn series(&self, p: &[f64]) -> Result<Vec<Vec<Taylor>>, PotentialError> {
        let n = self.n;
        match &self.kind {
            Kind::Explicit { entries, params } => Ok(entries
                .iter()
                .map(|row| row.iter().map(|e| eval_taylor(e, p, params, 1)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<_, _>>()?),
            Kind::Hessian { spec, beta } => {
                let fs = spec.series(p, 1)?;
                let b: Vec<Taylor> = beta.beta.iter().map(|e| eval_taylor(e, p, &beta.params, 1)).collect::<Result<_, _>>()?;
                Ok((0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                let mut acc = fs.l[0][i].mul(&b[0]).mul(&fs.l[0][j]);
                                for m in 1..n {
                                    acc = acc.add(&fs.l[m][i].mul(&b[m]).mul(&fs.l[m][j]));
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect())
            }
            Kind::Jacobian { spec, lambda } => {
                let fs = spec.series(p, 1)?;
                let lam: Vec<Taylor> =
                    lambda.lambda.iter().map(|e| eval_taylor(e, p, &lambda.params, 1)).collect::<Result<_, _>>()?;
                Ok((0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                let mut acc = fs.r[i][0].mul(&lam[0]).mul(&fs.l[0][j]);
                                for m in 1..n {
                                    acc = acc.add(&fs.r[i][m].mul(&lam[m]).mul(&fs.l[m][j]));
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect())
            }
        }
    }
}

fn check_len(n: usize, got: usize) -> Result<(), PotentialError> {
    if n != got {
        return Err(SystemsError::Dimension { n, got }.into());
    }
    Ok(())
}

/// `R` and `L = R^{-1}` as plain matrices.
fn frame_values(spec: &FrameSpec, p: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>), PotentialError> {
    let n = spec.n;
    let rv = spec.eval_matrix(p)?;
    let r = DMatrix::from_fn(n, n, |i, j| rv[i][j]);
    let l = r.clone().try_inverse().ok_or(GeometryError::SingularFrame { point: p.to_vec() })?;
    Ok((r, l))
}

/// `max_{i, j<k} |∂_k M_ij − ∂_j M_ik|`, divided by `max(1, max |M|)`.
pub fn curl_residual(m: &MatrixField, p: &[f64]) -> Result<f64, PotentialError> {
    let s = m.series(p)?;
    Ok(curl_of_series(&s))
}

pub(crate) fn curl_of_series(s: &[Vec<Taylor>]) -> f64 {
    let n = s.len();
    let mut worst: f64 = 0.0;
    let mut size: f64 = 1.0;
    for row in s {
        for j in 0..n {
            size = size.max(row[j].value().abs());
            for k in (j + 1)..n {
                worst = worst.max((row[j].partial(k).value() - row[k].partial(j).value()).abs());
            }
        }
    }
    worst / size
}

#[cfg(test)]
mod tests;
