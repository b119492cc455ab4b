//! Supplied coordinate charts for rich frames.

use super::{FrameSeries, FrameSpec, GeometryError};
use crate::exprlang::{eval_jet2, eval_scalar, eval_taylor, parse_expression, Expr, Params, Scalar, Taylor};
use serde::Serialize;

/// A chart `ρ: u ↦ w` with its inverse and an optional recorded scaling
/// `α^j(u)` such that `α^j r_j(w^i) = δ^i_j`.  When no scaling is recorded
/// it is taken to be `1 / r_j(w^j)`.
#[derive(Clone, Debug)]
pub struct RiemannChart {
    pub w_vars: Vec<String>,
    /// `w^i(u)`.
    pub w_exprs: Vec<Expr>,
    /// `u^i(w)`.
    pub u_exprs: Vec<Expr>,
    pub scaling: Option<Vec<Expr>>,
}

impl RiemannChart {
    pub fn parse(
        u_vars: &[String],
        w_vars: &[String],
        params: &Params,
        w_src: &[String],
        u_src: &[String],
        scaling_src: Option<&[String]>,
    ) -> Result<Self, GeometryError> {
        let names: Vec<String> = params.keys().cloned().collect();
        let n = u_vars.len();
        if w_vars.len() != n || w_src.len() != n || u_src.len() != n || scaling_src.is_some_and(|s| s.len() != n) {
            return Err(GeometryError::Invalid("chart needs n entries in every list".into()));
        }
        let p = |s: &String, v: &[String]| parse_expression(s, v, &names);
        Ok(RiemannChart {
            w_vars: w_vars.to_vec(),
            w_exprs: w_src.iter().map(|s| p(s, u_vars)).collect::<Result<_, _>>()?,
            u_exprs: u_src.iter().map(|s| p(s, w_vars)).collect::<Result<_, _>>()?,
            scaling: scaling_src.map(|v| v.iter().map(|s| p(s, u_vars)).collect::<Result<_, _>>()).transpose()?,
        })
    }

    /// The identity chart on `n` variables.
    pub fn identity(n: usize) -> Self {
        let ids: Vec<Expr> = (0..n).map(Expr::Var).collect();
        RiemannChart { w_vars: (1..=n).map(|i| format!("w{i}")).collect(), w_exprs: ids.clone(), u_exprs: ids, scaling: None }
    }

    pub fn to_w(&self, u: &[f64], params: &Params) -> Result<Vec<f64>, GeometryError> {
        self.w_exprs
            .iter()
            .map(|e| eval_scalar(e, u, params).map_err(|err| GeometryError::ChartDomain(err.to_string())))
            .collect()
    }

    pub fn to_u(&self, w: &[f64], params: &Params) -> Result<Vec<f64>, GeometryError> {
        self.u_exprs
            .iter()
            .map(|e| eval_scalar(e, w, params).map_err(|err| GeometryError::ChartDomain(err.to_string())))
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChartReport {
    /// `max |α^j r_j(w^i) - δ^i_j|`.
    pub normalization_residual: f64,
    /// `max` of the two round-trip errors, relative to `1 + |x|`.
    pub roundtrip_residual: f64,
    pub passed: bool,
}

pub fn verify_riemann_chart(
    spec: &FrameSpec,
    chart: &RiemannChart,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<ChartReport, GeometryError> {
    let n = spec.n;
    let prm = &spec.params;
    let cde = |e: crate::exprlang::ExprError| GeometryError::ChartDomain(e.to_string());
    let mut norm: f64 = 0.0;
    let mut trip: f64 = 0.0;
    for u in samples {
        let w = chart.to_w(u, prm)?;
        let u2 = chart.to_u(&w, prm)?;
        let w2 = chart.to_w(&u2, prm)?;
        for i in 0..n {
            trip = trip.max((u2[i] - u[i]).abs() / (1.0 + u[i].abs()));
            trip = trip.max((w2[i] - w[i]).abs() / (1.0 + w[i].abs()));
        }
        let r = spec.eval_matrix(u)?;
        let grads: Vec<Vec<f64>> =
            chart.w_exprs.iter().map(|e| eval_jet2(e, u, prm).map(|j| j.grad)).collect::<Result<_, _>>().map_err(cde)?;
        for j in 0..n {
            let a = |i: usize| (0..n).map(|l| r[l][j] * grads[i][l]).sum::<f64>();
            let alpha = match &chart.scaling {
                Some(s) => eval_scalar(&s[j], u, prm).map_err(cde)?,
                None => {
                    let d = a(j);
                    if d.abs() < 1e-12 {
                        return Err(GeometryError::ChartDomain(format!("r_{}(w^{}) vanishes at {u:?}", j + 1, j + 1)));
                    }
                    1.0 / d
                }
            };
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                norm = norm.max((alpha * a(i) - target).abs());
            }
        }
    }
    Ok(ChartReport { normalization_residual: norm, roundtrip_residual: trip, passed: norm < tol && trip < tol })
}

/// Connection coefficients of the normalized frame expressed at a point
/// of the chart range, together with their `w`-derivatives.
#[derive(Clone, Debug, Serialize)]
pub struct Pullback {
    pub n: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    /// `Z_ij^k` at `(i n + j) n + k`.
    pub z: Vec<f64>,
    /// `∂_a Z_ij^k` at `a n^3 + (i n + j) n + k`.
    pub dz: Vec<f64>,
    /// Normalization factors `α^j` at `u`.
    pub alpha: Vec<f64>,
}

impl Pullback {
    #[inline]
    pub fn z(&self, i: usize, j: usize, k: usize) -> f64 {
        self.z[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn dz(&self, a: usize, i: usize, j: usize, k: usize) -> f64 {
        let n = self.n;
        self.dz[a * n * n * n + (i * n + j) * n + k]
    }

    /// `max |Z_ij^k - Z_ji^k|`.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut w: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    w = w.max((self.z(i, j, k) - self.z(j, i, k)).abs());
                }
            }
        }
        w
    }

    /// Flatness in `w`-coordinates,
    /// `∂_m Z_ik^j - ∂_k Z_im^j - Σ_t (Z_tk^j Z_im^t - Z_tm^j Z_ik^t)`,
    /// normalized per equation by one plus the sum of term magnitudes.
    pub fn flatness_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for m in 0..n {
                        let (a, b) = (self.dz(m, i, k, j), self.dz(k, i, m, j));
                        let mut sum = a - b;
                        let mut mag = a.abs() + b.abs();
                        for t in 0..n {
                            let p = self.z(t, k, j) * self.z(i, m, t);
                            let q = self.z(t, m, j) * self.z(i, k, t);
                            sum -= p - q;
                            mag += p.abs() + q.abs();
                        }
                        worst = worst.max(sum.abs() / (1.0 + mag));
                    }
                }
            }
        }
        worst
    }
}

/// Series of the normalized frame `α^j r_j` at `u`, with `α` as values.
fn normalized_series(spec: &FrameSpec, chart: &RiemannChart, u: &[f64], order: usize) -> Result<(FrameSeries, Vec<f64>), GeometryError> {
    let n = spec.n;
    let prm = &spec.params;
    let cde = |e: crate::exprlang::ExprError| GeometryError::ChartDomain(e.to_string());
    let fs = spec.series(u, order).map_err(|e| match e {
        GeometryError::Expr(x) => cde(x),
        other => other,
    })?;
    let alpha: Vec<Taylor> = match &chart.scaling {
        Some(s) => s.iter().map(|e| eval_taylor(e, u, prm, order)).collect::<Result<_, _>>().map_err(cde)?,
        None => {
            let ws: Vec<Taylor> =
                chart.w_exprs.iter().map(|e| eval_taylor(e, u, prm, order + 1)).collect::<Result<_, _>>().map_err(cde)?;
            let big = spec.series(u, order + 1)?;
            let mut out = Vec::with_capacity(n);
            for (j, wj) in ws.iter().enumerate() {
                let d = big.dir(j, wj);
                if d.value().abs() < 1e-12 {
                    return Err(GeometryError::ChartDomain(format!("r_{}(w^{}) vanishes at {u:?}", j + 1, j + 1)));
                }
                out.push(d.lift(1.0).div(&d));
            }
            out
        }
    };
    let vals = alpha.iter().map(|a| a.value()).collect();
    Ok((fs.scaled(&alpha)?, vals))
}

/// `Z_ij^k(w) = Γ̃_ij^k(ρ^{-1}(w))` for the normalized frame `α^j r_j`.
pub fn pullback_connection(spec: &FrameSpec, chart: &RiemannChart, w: &[f64]) -> Result<Pullback, GeometryError> {
    let n = spec.n;
    let u = chart.to_u(w, &spec.params)?;
    let (scaled, alpha) = normalized_series(spec, chart, &u, 3)?;
    let z = scaled.gamma_values();
    let dz = (0..n)
        .flat_map(|a| (0..n * n * n).map(move |idx| (a, idx)))
        .map(|(a, idx)| scaled.dir(a, &scaled.gamma[idx]).value())
        .collect();
    Ok(Pullback { n, w: w.to_vec(), u, z, dz, alpha })
}

/// Values `Z_ij^k(w)` only, without derivatives.
pub fn pullback_z(spec: &FrameSpec, chart: &RiemannChart, w: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let u = chart.to_u(w, &spec.params)?;
    Ok(normalized_series(spec, chart, &u, 1)?.0.gamma_values())
}

#[cfg(test)]
mod tests {
    use super::super::tests::cylindrical;
    use super::*;

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn cyl_chart() -> RiemannChart {
        let u = strs(&["u1", "u2", "u3"]);
        let w = strs(&["w1", "w2", "w3"]);
        RiemannChart::parse(
            &u,
            &w,
            &Params::new(),
            &strs(&["0.5*ln(u1^2+u2^2)", "arctan(u2/u1)", "u3"]),
            &strs(&["exp(w1)*cos(w2)", "exp(w1)*sin(w2)", "w3"]),
            None,
        )
        .unwrap()
    }

    fn commuting() -> (FrameSpec, RiemannChart) {
        let spec = FrameSpec::parse(
            &["u1", "u2", "u3"],
            Params::new(),
            &[vec!["u1", "u2", "u3"], vec!["u1", "u2", "0"], vec!["u1", "0", "u3"]],
            vec![[1.0, 2.0]; 3],
            vec![1.5; 3],
        )
        .unwrap();
        let chart = RiemannChart::parse(
            &spec.vars,
            &strs(&["w1", "w2", "w3"]),
            &Params::new(),
            &strs(&["ln(u2) + ln(u3) - ln(u1)", "ln(u1) - ln(u3)", "ln(u1) - ln(u2)"]),
            &strs(&["exp(w1+w2+w3)", "exp(w1+w2)", "exp(w1+w3)"]),
            None,
        )
        .unwrap();
        (spec, chart)
    }

    #[test]
    fn cylindrical_chart_verifies() {
        let spec = cylindrical();
        let rep = verify_riemann_chart(&spec, &cyl_chart(), &spec.samples(30, 0), 1e-9).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.normalization_residual < 1e-9);
    }

    #[test]
    fn commuting_chart_verifies_and_pullback_is_symmetric_and_flat() {
        let (spec, chart) = commuting();
        let rep = verify_riemann_chart(&spec, &chart, &spec.samples(30, 0), 1e-9).unwrap();
        assert!(rep.passed, "{rep:?}");
        for u in spec.samples(10, 3) {
            let w = chart.to_w(&u, &spec.params).unwrap();
            let pb = pullback_connection(&spec, &chart, &w).unwrap();
            assert!(pb.symmetry_residual() < 1e-9);
            assert!(pb.flatness_residual() < 1e-8);
        }
    }

    #[test]
    fn identity_chart_on_standard_frame() {
        let spec = FrameSpec::standard(3);
        let chart = RiemannChart::identity(3);
        let rep = verify_riemann_chart(&spec, &chart, &spec.samples(10, 0), 1e-9).unwrap();
        assert_eq!(rep.normalization_residual, 0.0);
        assert_eq!(rep.roundtrip_residual, 0.0);
        let pb = pullback_connection(&spec, &chart, &[0.2, 0.4, 0.6]).unwrap();
        assert!(pb.z.iter().chain(&pb.dz).all(|x| *x == 0.0));
    }

    #[test]
    fn wrong_chart_fails_normalization() {
        let (spec, _) = commuting();
        match verify_riemann_chart(&spec, &cyl_chart(), &spec.samples(10, 0), 1e-9) {
            Ok(rep) => assert!(!rep.passed),
            Err(e) => assert!(matches!(e, GeometryError::ChartDomain(_))),
        }
    }
}
