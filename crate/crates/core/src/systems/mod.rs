//! The β-system (extensions) and λ-system (fluxes) of a frame.
//!
//! Both systems split into first-order PDEs along the frame directions and
//! linear algebraic relations.  Algebraic rows are generated for every
//! `k` and every pair `i < j` with `i, j, k` distinct, ordered by `(k, i, j)`;
//! for `n = 3` this reproduces the usual `3 × 3` layouts row by row.

mod darboux;
mod residual;

pub use darboux::{darboux_compatibility, darboux_from_pullback, DarbouxReport};
pub use residual::{
    beta_residual, convexity_classify, lambda_residual, sevennec_identity, BetaCandidate, Convexity, ConvexityReport,
    EquationResidual, LambdaCandidate, ResidualRecord,
};

use crate::exprlang::Scalar;
use crate::geometry::{ConnectionEval, GeometryError};
use crate::exprlang::ExprError;
use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SystemsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("eigenvalues coincide at {point:?}")]
    CoincidentEigenvalues { point: Vec<f64> },
    #[error("candidate has {got} components, frame has dimension {n}")]
    Dimension { n: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Beta,
    Lambda,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgebraicRow {
    pub coeffs: Vec<f64>,
    /// `(i, j, k)` with `i < j`, zero-based.
    pub indices: [usize; 3],
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgebraicSystem {
    pub kind: SystemKind,
    pub n: usize,
    pub rows: Vec<AlgebraicRow>,
    /// `max |Γ|` at the sample, used to scale the absolute rank floor.
    pub scale: f64,
}

impl AlgebraicSystem {
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.n, |r, c| self.rows[r].coeffs[c])
    }

    /// Row values at an unknown vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.coeffs.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Index triples `(i, j, k)`, `i < j`, `k ∉ {i, j}`, ordered by `(k, i, j)`.
pub fn algebraic_triples(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for k in 0..n {
        for i in 0..n {
            for j in i + 1..n {
                if i != k && j != k {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// Coefficients of `β^k c_ij^k + β^j Γ_ik^j - β^i Γ_jk^i`.
pub fn beta_row<S: Scalar>(n: usize, g: impl Fn(usize, usize, usize) -> S, t: [usize; 3]) -> Vec<S> {
    let [i, j, k] = t;
    let zero = g(0, 0, 0).lift(0.0);
    let mut row = vec![zero; n];
    row[k] = g(i, j, k).sub(&g(j, i, k));
    row[j] = g(i, k, j);
    row[i] = g(j, k, i).neg();
    row
}

/// Coefficients of `Γ_ji^k λ^i - Γ_ij^k λ^j + c_ij^k λ^k`.
pub fn lambda_row<S: Scalar>(n: usize, g: impl Fn(usize, usize, usize) -> S, t: [usize; 3]) -> Vec<S> {
    let [i, j, k] = t;
    let zero = g(0, 0, 0).lift(0.0);
    let mut row = vec![zero; n];
    row[i] = g(j, i, k);
    row[j] = g(i, j, k).neg();
    row[k] = g(i, j, k).sub(&g(j, i, k));
    row
}

fn assemble(conn: &ConnectionEval, kind: SystemKind) -> AlgebraicSystem {
    let n = conn.n;
    let g = |i, j, k| conn.gamma(i, j, k);
    let rows = algebraic_triples(n)
        .into_iter()
        .map(|t| AlgebraicRow {
            coeffs: match kind {
                SystemKind::Beta => beta_row(n, g, t),
                SystemKind::Lambda => lambda_row(n, g, t),
            },
            indices: t,
        })
        .collect();
    AlgebraicSystem { kind, n, rows, scale: conn.gamma_scale() }
}

pub fn beta_algebraic(conn: &ConnectionEval) -> AlgebraicSystem {
    assemble(conn, SystemKind::Beta)
}

pub fn lambda_algebraic(conn: &ConnectionEval) -> AlgebraicSystem {
    assemble(conn, SystemKind::Lambda)
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank: `σ > rel_tol σ_max`, and zero when `σ_max <= floor`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64, floor: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        None => 0,
        Some(&smax) if smax <= floor => 0,
        Some(&smax) => s.iter().filter(|&&x| x > rel_tol * smax).count(),
    }
}

/// Absolute floor below which a system counts as zero.
pub const RANK_FLOOR: f64 = 1e-10;

/// Generic rank: the maximum numerical rank over the samples.  The
/// absolute floor is scaled by `max(1, max |Γ|)` at each sample.
pub fn generic_rank(systems: &[AlgebraicSystem], rel_tol: f64) -> usize {
    systems
        .iter()
        .map(|s| numerical_rank(&s.matrix(), rel_tol, RANK_FLOOR * s.scale.max(1.0)))
        .max()
        .unwrap_or(0)
}

/// Entrywise residual of `A_λ = D A_β^T D`, `D = diag(1, -1, 1)`.
pub fn check_rank_duality_n3(conn: &ConnectionEval) -> f64 {
    assert_eq!(conn.n, 3, "the duality identity is stated for n = 3");
    let ab = beta_algebraic(conn).matrix();
    let al = lambda_algebraic(conn).matrix();
    let d = [1.0, -1.0, 1.0];
    let mut worst: f64 = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            worst = worst.max((al[(r, c)] - d[r] * ab[(c, r)] * d[c]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::Params;
    use crate::geometry::{connection_at, random_frame, FrameSpec};

    fn spec3(cols: &[[&str; 3]; 3], dom: [[f64; 2]; 3], params: Params) -> FrameSpec {
        let cols: Vec<Vec<&str>> = cols.iter().map(|c| c.to_vec()).collect();
        let base = dom.iter().map(|b| 0.5 * (b[0] + b[1])).collect();
        FrameSpec::parse(&["u1", "u2", "u3"], params, &cols, dom.to_vec(), base).unwrap()
    }

    fn ex66() -> FrameSpec {
        spec3(&[["-1", "0", "u2+1"], ["u3/(u2^2-1)", "-1", "u1"], ["1", "0", "1-u2"]], [[0.0, 1.0], [1.5, 2.5], [0.0, 1.0]], Params::new())
    }

    fn ranks(spec: &FrameSpec) -> (usize, usize) {
        let s: Vec<ConnectionEval> = spec.samples(20, 0).iter().map(|p| connection_at(spec, p).unwrap()).collect();
        let b: Vec<_> = s.iter().map(beta_algebraic).collect();
        let l: Vec<_> = s.iter().map(lambda_algebraic).collect();
        (generic_rank(&b, 1e-8), generic_rank(&l, 1e-8))
    }

    #[test]
    fn standard_frame_rows_vanish() {
        let c = connection_at(&FrameSpec::standard(3), &[0.5; 3]).unwrap();
        let b = beta_algebraic(&c);
        assert_eq!(b.rows.len(), 3);
        assert!(b.rows.iter().all(|r| r.coeffs.iter().all(|x| *x == 0.0)));
        assert!(lambda_algebraic(&c).rows.iter().all(|r| r.coeffs.iter().all(|x| *x == 0.0)));
        assert_eq!(ranks(&FrameSpec::standard(3)), (0, 0));
        assert_eq!(check_rank_duality_n3(&c), 0.0);
    }

    #[test]
    fn two_dimensional_systems_are_empty() {
        let c = connection_at(&FrameSpec::standard(2), &[0.5; 2]).unwrap();
        assert!(beta_algebraic(&c).rows.is_empty());
        assert!(lambda_algebraic(&c).rows.is_empty());
    }

    #[test]
    fn ideal_gas_rows_are_multiples_of_beta1_minus_beta3() {
        let mut p = Params::new();
        p.insert("gamma".into(), 1.4);
        let c = "sqrt(gamma)*exp(S/2)*v^(-(gamma+1)/2)";
        let cols: Vec<Vec<String>> = vec![
            vec!["1".into(), c.into(), "0".into()],
            vec!["-exp(S)*v^(-gamma)".into(), "0".into(), "-gamma*exp(S)*v^(-gamma-1)".into()],
            vec!["1".into(), format!("-{c}"), "0".into()],
        ];
        let cols: Vec<Vec<&str>> = cols.iter().map(|c| c.iter().map(|s| s.as_str()).collect()).collect();
        let spec = FrameSpec::parse(&["v", "u", "S"], p, &cols, vec![[1.0, 2.0], [-1.0, 1.0], [0.0, 1.0]], vec![1.5, 0.0, 0.5]).unwrap();
        for pt in spec.samples(10, 0) {
            let s = beta_algebraic(&connection_at(&spec, &pt).unwrap());
            let scale = s.scale.max(1.0);
            for r in &s.rows {
                assert!((r.coeffs[0] + r.coeffs[2]).abs() < 1e-12 * scale, "{:?}", r.coeffs);
                assert!(r.coeffs[1].abs() < 1e-12 * scale);
            }
            assert!(s.rows.iter().any(|r| r.coeffs[0].abs() > 1e-3));
        }
    }

    #[test]
    fn nonrich_example_lambda_row() {
        let spec = ex66();
        assert_eq!(ranks(&spec), (1, 1));
        for pt in spec.samples(10, 0) {
            let l = lambda_algebraic(&connection_at(&spec, &pt).unwrap());
            // every row is a multiple of (1 - u2) λ1 - 2 λ2 + (1 + u2) λ3
            let target = [1.0 - pt[1], -2.0, 1.0 + pt[1]];
            for r in &l.rows {
                let cross: f64 = (0..3)
                    .map(|a| (r.coeffs[a] * target[(a + 1) % 3] - r.coeffs[(a + 1) % 3] * target[a]).abs())
                    .sum();
                assert!(cross < 1e-12);
            }
            assert!(check_rank_duality_n3(&connection_at(&spec, &pt).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn rank_two_example() {
        let spec = spec3(&[["u1", "u2", "0"], ["-u2", "u1", "0"], ["-u2", "u1", "1"]], [[0.5, 1.5]; 3], Params::new());
        assert_eq!(ranks(&spec), (2, 2));
    }

    #[test]
    fn random_frames_have_equal_ranks_and_duality() {
        for seed in 0..100 {
            let spec = random_frame(seed, 3);
            for p in spec.samples(3, seed as usize) {
                let c = connection_at(&spec, &p).unwrap();
                assert!(check_rank_duality_n3(&c) < 1e-12);
                let b = beta_algebraic(&c);
                let l = lambda_algebraic(&c);
                assert_eq!(generic_rank(&[b], 1e-8), generic_rank(&[l], 1e-8));
            }
        }
    }

    #[test]
    fn four_dimensional_example_has_unequal_ranks() {
        let cols: Vec<Vec<&str>> = vec![
            vec!["1", "0", "u2", "u4"],
            vec!["0", "1", "u1", "0"],
            vec!["u3", "0", "1", "0"],
            vec!["1", "0", "0", "0"],
        ];
        let spec = FrameSpec::parse(&["u1", "u2", "u3", "u4"], Params::new(), &cols, vec![[0.5, 1.5]; 4], vec![1.0; 4]).unwrap();
        let s: Vec<ConnectionEval> = spec.samples(20, 0).iter().map(|p| connection_at(&spec, p).unwrap()).collect();
        let b: Vec<_> = s.iter().map(beta_algebraic).collect();
        let l: Vec<_> = s.iter().map(lambda_algebraic).collect();
        assert_eq!(b[0].rows.len(), 12);
        assert_eq!((generic_rank(&l, 1e-8), generic_rank(&b, 1e-8)), (3, 2));
    }
}
