//! Frames, co-frames and the connection coefficients they induce.
//!
//! A frame is stored column-wise: `frame[j]` holds the `n` component
//! expressions of the vector field `R_j`, so the matrix `R` has entries
//! `R[m][j] = frame[j][m]`.  `L = R^{-1}` has rows `L^k`.  Connection
//! coefficients are indexed `Γ_ij^k = L^k (DR_j) R_i`, so that the
//! directional derivative of `r_j` along `r_i` is `Σ_k Γ_ij^k r_k`, and
//! `c_ij^k = Γ_ij^k - Γ_ji^k` are the structure coefficients of the frame.

mod chart;
mod connection;
mod sampling;
mod series;

pub use chart::{pullback_connection, pullback_z, verify_riemann_chart, ChartReport, Pullback, RiemannChart};
pub use connection::{
    check_symmetry_flatness, connection_at, curvature_residual, curvature_residual_perturbed, eval_connection, structure_coefficients_bracket, ConnectionEval, Residuals,
};
pub use sampling::{halton, halton_points};
pub use series::FrameSeries;

use crate::exprlang::{eval_jet2, eval_scalar, parse_expression, Expr, ExprError, Params, Scalar};
use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GeometryError {
    #[error("singular frame at {point:?}")]
    SingularFrame { point: Vec<f64> },
    #[error("scaling vanishes at {point:?}")]
    ZeroScaling { point: Vec<f64> },
    #[error("chart domain error: {0}")]
    ChartDomain(String),
    #[error("frame is not rich")]
    NotRich,
    #[error("invalid frame specification: {0}")]
    Invalid(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// A frame of `n` vector fields on a box in `R^n`.
#[derive(Clone, Debug)]
pub struct FrameSpec {
    pub n: usize,
    pub vars: Vec<String>,
    pub params: Params,
    /// `frame[j][m]`: component `m` of `R_j`.
    pub frame: Vec<Vec<Expr>>,
    pub domain: Vec<[f64; 2]>,
    pub base_point: Vec<f64>,
    pub chart: Option<RiemannChart>,
}

impl FrameSpec {
    pub fn new(
        vars: Vec<String>,
        params: Params,
        frame: Vec<Vec<Expr>>,
        domain: Vec<[f64; 2]>,
        base_point: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let n = vars.len();
        let bad = |m: String| Err(GeometryError::Invalid(m));
        if n == 0 {
            return bad("dimension must be positive".into());
        }
        if frame.len() != n || frame.iter().any(|c| c.len() != n) {
            return bad(format!("frame must be {n} vectors with {n} components"));
        }
        if domain.len() != n || base_point.len() != n {
            return bad("domain box and base point must match the dimension".into());
        }
        for (i, (b, x)) in domain.iter().zip(&base_point).enumerate() {
            if !(b[0] < b[1]) {
                return bad(format!("empty domain interval for {}", vars[i]));
            }
            if *x < b[0] || *x > b[1] {
                return bad(format!("base point outside the domain box in {}", vars[i]));
            }
        }
        let mut used = Vec::new();
        for e in frame.iter().flatten() {
            if e.max_var().is_some_and(|v| v >= n) {
                return bad("variable index out of range".into());
            }
            e.params(&mut used);
        }
        if let Some(p) = used.iter().find(|p| !params.contains_key(*p)) {
            return Err(ExprError::UnknownIdentifier(p.clone()).into());
        }
        Ok(FrameSpec { n, vars, params, frame, domain, base_point, chart: None })
    }

    /// Parse vectors given as strings; `columns[j][m]` is component `m` of `R_j`.
    pub fn parse(
        vars: &[&str],
        params: Params,
        columns: &[Vec<&str>],
        domain: Vec<[f64; 2]>,
        base_point: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let names: Vec<String> = params.keys().cloned().collect();
        let frame = columns
            .iter()
            .map(|c| c.iter().map(|s| parse_expression(s, &vars, &names)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        FrameSpec::new(vars, params, frame, domain, base_point)
    }

    /// The constant standard frame `R_i = e_i` on the unit box.
    pub fn standard(n: usize) -> Self {
        let vars: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
        let frame = (0..n)
            .map(|j| (0..n).map(|m| Expr::Num(if m == j { 1.0 } else { 0.0 })).collect())
            .collect();
        FrameSpec::new(vars, Params::new(), frame, vec![[0.0, 1.0]; n], vec![0.5; n]).expect("standard frame is valid")
    }

    /// Frame matrix `R[m][j]` at a point.
    pub fn eval_matrix(&self, p: &[f64]) -> Result<Vec<Vec<f64>>, GeometryError> {
        let mut r = vec![vec![0.0; self.n]; self.n];
        for (j, col) in self.frame.iter().enumerate() {
            for (m, e) in col.iter().enumerate() {
                r[m][j] = eval_scalar(e, p, &self.params)?;
            }
        }
        Ok(r)
    }

    /// Truncated Taylor data of the frame and its connection about `p`.
    pub fn series(&self, p: &[f64], order: usize) -> Result<FrameSeries, GeometryError> {
        let cols = self
            .frame
            .iter()
            .map(|c| c.iter().map(|e| crate::exprlang::eval_taylor(e, p, &self.params, order)).collect())
            .collect::<Result<Vec<Vec<_>>, _>>()?;
        FrameSeries::from_columns(cols, p)
    }

    /// `count` Halton points in the domain box, skipping the first `start`.
    pub fn samples(&self, count: usize, start: usize) -> Vec<Vec<f64>> {
        halton_points(&self.domain, count, start)
    }

    /// Frame with columns `α^j R_j`.
    pub fn scale_frame(&self, alpha: &[Expr]) -> Result<FrameSpec, GeometryError> {
        if alpha.len() != self.n {
            return Err(GeometryError::Invalid("one scaling factor per vector is required".into()));
        }
        for p in self.samples(50, 0) {
            for a in alpha {
                let v = eval_scalar(a, &p, &self.params)?;
                if v.abs() < 1e-12 {
                    return Err(GeometryError::ZeroScaling { point: p });
                }
            }
        }
        let frame = self
            .frame
            .iter()
            .zip(alpha)
            .map(|(col, a)| {
                col.iter()
                    .map(|e| match (a, e) {
                        (Expr::Num(x), _) if *x == 1.0 => e.clone(),
                        (_, Expr::Num(z)) if *z == 0.0 => e.clone(),
                        _ => Expr::Mul(Box::new(a.clone()), Box::new(e.clone())),
                    })
                    .collect()
            })
            .collect();
        let mut out = FrameSpec::new(self.vars.clone(), self.params.clone(), frame, self.domain.clone(), self.base_point.clone())?;
        out.chart = None;
        Ok(out)
    }
}

/// A random polynomial frame `2 I + (small quadratic terms)` on `[-1/2, 1/2]^n`.
/// Used by property tests and the self-test suite.
pub fn random_frame(seed: u64, n: usize) -> FrameSpec {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let vars: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
    let mut mono: Vec<String> = vars.clone();
    for a in 0..n {
        for b in a..n {
            mono.push(format!("{}*{}", vars[a], vars[b]));
        }
    }
    let cols: Vec<Vec<String>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|m| {
                    let mut s = if m == j { "2".to_string() } else { "0".to_string() };
                    for t in &mono {
                        let c: f64 = rng.gen_range(-0.5..0.5);
                        s.push_str(&format!(" + ({c:.4})*{t}"));
                    }
                    s
                })
                .collect()
        })
        .collect();
    let cols: Vec<Vec<&str>> = cols.iter().map(|c| c.iter().map(|s| s.as_str()).collect()).collect();
    let v: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    FrameSpec::parse(&v, Params::new(), &cols, vec![[-0.5, 0.5]; n], vec![0.0; n]).expect("random frame parses")
}

/// Location and size of the largest violation of richness.
#[derive(Clone, Debug, Serialize)]
pub struct RichWitness {
    pub point: Vec<f64>,
    pub indices: [usize; 3],
    pub value: f64,
}

/// Richness test: `c_ij^k` with `i, j, k` distinct must vanish.  Values
/// are compared relative to `max(1, max |Γ|)` at each sample.
pub fn is_rich(spec: &FrameSpec, samples: &[Vec<f64>], tol: f64) -> Result<(bool, Option<RichWitness>), GeometryError> {
    let n = spec.n;
    let mut worst: Option<RichWitness> = None;
    for p in samples {
        let conn = connection_at(spec, p)?;
        let scale = conn.gamma_scale().max(1.0);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    let v = conn.c(i, j, k).abs() / scale;
                    if worst.as_ref().map_or(true, |w| v > w.value) {
                        worst = Some(RichWitness { point: p.clone(), indices: [i, j, k], value: v });
                    }
                }
            }
        }
    }
    let rich = worst.as_ref().map_or(true, |w| w.value < tol);
    Ok((rich, worst))
}

/// Jacobians of the frame columns: `dr[j][m][l] = ∂_l R[m][j]`.
pub(crate) fn frame_jacobians(spec: &FrameSpec, p: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>), GeometryError> {
    let n = spec.n;
    let mut r = vec![vec![0.0; n]; n];
    let mut dr = vec![vec![vec![0.0; n]; n]; n];
    for (j, col) in spec.frame.iter().enumerate() {
        for (m, e) in col.iter().enumerate() {
            let jet = eval_jet2(e, p, &spec.params)?;
            r[m][j] = jet.value();
            dr[j][m].copy_from_slice(&jet.grad);
        }
    }
    Ok((r, dr))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cylindrical() -> FrameSpec {
        FrameSpec::parse(
            &["u1", "u2", "u3"],
            Params::new(),
            &[vec!["u1", "u2", "0"], vec!["-u2", "u1", "0"], vec!["0", "0", "1"]],
            vec![[1.0, 2.0], [1.0, 2.0], [0.0, 1.0]],
            vec![1.5, 1.5, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn richness_examples() {
        let spec = cylindrical();
        let s = spec.samples(20, 0);
        assert!(is_rich(&spec, &s, 1e-8).unwrap().0);
        let std = FrameSpec::standard(3);
        assert!(is_rich(&std, &std.samples(20, 0), 1e-8).unwrap().0);
        let nr = FrameSpec::parse(
            &["u1", "u2", "u3"],
            Params::new(),
            &[vec!["-1", "0", "u2+1"], vec!["u3/(u2^2-1)", "-1", "u1"], vec!["1", "0", "1-u2"]],
            vec![[0.0, 1.0], [1.5, 2.5], [0.0, 1.0]],
            vec![0.5, 2.0, 0.5],
        )
        .unwrap();
        let (rich, w) = is_rich(&nr, &nr.samples(20, 0), 1e-8).unwrap();
        assert!(!rich);
        assert!(w.unwrap().value > 1e-3);
    }

    #[test]
    fn unit_scaling_is_identity() {
        let spec = cylindrical();
        let one = vec![Expr::Num(1.0); 3];
        let s = spec.scale_frame(&one).unwrap();
        assert_eq!(s.frame, spec.frame);
    }

    #[test]
    fn zero_scaling_rejected() {
        let spec = cylindrical();
        let a = vec![Expr::Num(1.0), Expr::Num(0.0), Expr::Num(1.0)];
        assert!(matches!(spec.scale_frame(&a), Err(GeometryError::ZeroScaling { .. })));
    }

    #[test]
    fn unbound_frame_parameter_rejected() {
        let r = FrameSpec::new(
            vec!["u1".into()],
            Params::new(),
            vec![vec![Expr::Param("K".into())]],
            vec![[0.0, 1.0]],
            vec![0.5],
        );
        assert!(matches!(r, Err(GeometryError::Expr(ExprError::UnknownIdentifier(_)))));
    }
}
