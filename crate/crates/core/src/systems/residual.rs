//! PDE and algebraic residuals of candidate solutions.

use super::{algebraic_triples, SystemsError};
use crate::exprlang::{eval_jet2, eval_scalar, parse_expression, Expr, Jet2, Params};
use crate::geometry::{connection_at, ConnectionEval, FrameSpec};
use serde::{Deserialize, Serialize};

/// Candidate `β = (β^1, …, β^n)`, optionally with a closed-form `η`.
#[derive(Clone, Debug)]
pub struct BetaCandidate {
    pub beta: Vec<Expr>,
    pub eta: Option<Expr>,
    pub params: Params,
}

/// Candidate `λ = (λ^1, …, λ^n)`, optionally with a closed-form flux `f`.
#[derive(Clone, Debug)]
pub struct LambdaCandidate {
    pub lambda: Vec<Expr>,
    pub flux: Option<Vec<Expr>>,
    pub params: Params,
}

fn parse_all(src: &[String], vars: &[String], params: &Params) -> Result<Vec<Expr>, SystemsError> {
    let names: Vec<String> = params.keys().cloned().collect();
    Ok(src.iter().map(|s| parse_expression(s, vars, &names)).collect::<Result<_, _>>()?)
}

impl BetaCandidate {
    pub fn parse(vars: &[String], params: Params, beta: &[String], eta: Option<&str>) -> Result<Self, SystemsError> {
        let b = parse_all(beta, vars, &params)?;
        let eta = eta.map(|s| parse_all(&[s.to_string()], vars, &params)).transpose()?.map(|mut v| v.remove(0));
        Ok(BetaCandidate { beta: b, eta, params })
    }

    pub fn zero(n: usize) -> Self {
        BetaCandidate { beta: vec![Expr::Num(0.0); n], eta: None, params: Params::new() }
    }

    pub fn values(&self, p: &[f64]) -> Result<Vec<f64>, SystemsError> {
        Ok(self.beta.iter().map(|e| eval_scalar(e, p, &self.params)).collect::<Result<_, _>>()?)
    }

    /// Candidate with components `(α^i)^2 β^i`.
    pub fn scaled(&self, alpha: &[Expr]) -> Self {
        let beta = self
            .beta
            .iter()
            .zip(alpha)
            .map(|(b, a)| {
                let sq = Expr::Mul(Box::new(a.clone()), Box::new(a.clone()));
                Expr::Mul(Box::new(sq), Box::new(b.clone()))
            })
            .collect();
        BetaCandidate { beta, eta: self.eta.clone(), params: self.params.clone() }
    }
}

impl LambdaCandidate {
    pub fn parse(vars: &[String], params: Params, lambda: &[String], flux: Option<&[String]>) -> Result<Self, SystemsError> {
        let l = parse_all(lambda, vars, &params)?;
        let flux = flux.map(|f| parse_all(f, vars, &params)).transpose()?;
        Ok(LambdaCandidate { lambda: l, flux, params })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        LambdaCandidate { lambda: vec![Expr::Num(c); n], flux: None, params: Params::new() }
    }

    pub fn values(&self, p: &[f64]) -> Result<Vec<f64>, SystemsError> {
        Ok(self.lambda.iter().map(|e| eval_scalar(e, p, &self.params)).collect::<Result<_, _>>()?)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EquationResidual {
    /// `[i, j]` for a PDE along `r_i` for component `j`, `[i, j, k]` for an algebraic row.
    pub indices: Vec<usize>,
    pub raw: f64,
    /// `raw / (1 + Σ |terms|)`.
    pub normalized: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualRecord {
    pub point: Vec<f64>,
    pub pde: Vec<EquationResidual>,
    pub algebraic: Vec<EquationResidual>,
    /// Largest normalized residual over all equations.
    pub max_abs: f64,
    /// Mismatch of the supplied closed form (`η` or `f`), normalized.
    pub closed_form: Option<f64>,
}

fn eq(indices: Vec<usize>, terms: &[f64]) -> EquationResidual {
    let raw: f64 = terms.iter().sum();
    let mag: f64 = terms.iter().map(|t| t.abs()).sum();
    EquationResidual { indices, raw, normalized: raw.abs() / (1.0 + mag) }
}

fn finish(point: &[f64], pde: Vec<EquationResidual>, algebraic: Vec<EquationResidual>, closed_form: Option<f64>) -> ResidualRecord {
    let max_abs = pde.iter().chain(&algebraic).fold(0.0f64, |m, e| m.max(e.normalized));
    let max_abs = closed_form.map_or(max_abs, |c| max_abs.max(c));
    ResidualRecord { point: point.to_vec(), pde, algebraic, max_abs, closed_form }
}

/// `r_i(f) = Σ_l R[l][i] ∂_l f`.
fn dir(conn: &ConnectionEval, i: usize, j: &Jet2) -> f64 {
    (0..conn.n).map(|l| conn.r[l][i] * j.grad[l]).sum()
}

fn jets(exprs: &[Expr], p: &[f64], params: &Params, n: usize) -> Result<Vec<Jet2>, SystemsError> {
    if exprs.len() != n {
        return Err(SystemsError::Dimension { n, got: exprs.len() });
    }
    Ok(exprs.iter().map(|e| eval_jet2(e, p, params)).collect::<Result<_, _>>()?)
}

/// Residuals of `r_i(β^j) = β^j (Γ_ij^j + c_ij^j) - β^i Γ_jj^i` and of the
/// algebraic rows, plus `R_i^T D²η R_j - δ_ij β^i` when `η` is supplied.
pub fn beta_residual(spec: &FrameSpec, cand: &BetaCandidate, point: &[f64]) -> Result<ResidualRecord, SystemsError> {
    let conn = connection_at(spec, point)?;
    beta_residual_at(&conn, cand)
}

pub(crate) fn beta_residual_at(conn: &ConnectionEval, cand: &BetaCandidate) -> Result<ResidualRecord, SystemsError> {
    let n = conn.n;
    let point = &conn.point;
    let b = jets(&cand.beta, point, &cand.params, n)?;
    let g = |i, j, k| conn.gamma(i, j, k);
    let mut pde = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let terms = [dir(conn, i, &b[j]), -b[j].value * (g(i, j, j) + conn.c(i, j, j)), b[i].value * g(j, j, i)];
            pde.push(eq(vec![i, j], &terms));
        }
    }
    let algebraic = algebraic_triples(n)
        .into_iter()
        .map(|[i, j, k]| eq(vec![i, j, k], &[b[k].value * conn.c(i, j, k), b[j].value * g(i, k, j), -b[i].value * g(j, k, i)]))
        .collect();
    let closed = match &cand.eta {
        None => None,
        Some(e) => {
            let h = eval_jet2(e, point, &cand.params)?;
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut q = 0.0;
                    let mut mag = 0.0;
                    for a in 0..n {
                        for c in 0..n {
                            let t = conn.r[a][i] * h.h(a, c) * conn.r[c][j];
                            q += t;
                            mag += t.abs();
                        }
                    }
                    let target = if i == j { b[i].value } else { 0.0 };
                    worst = worst.max((q - target).abs() / (1.0 + mag + target.abs()));
                }
            }
            Some(worst)
        }
    };
    Ok(finish(point, pde, algebraic, closed))
}

/// Residuals of `r_i(λ^j) = Γ_ji^j (λ^i - λ^j)` and of the algebraic rows,
/// plus `Df R_i - λ^i R_i` when a flux is supplied.
pub fn lambda_residual(spec: &FrameSpec, cand: &LambdaCandidate, point: &[f64]) -> Result<ResidualRecord, SystemsError> {
    let conn = connection_at(spec, point)?;
    lambda_residual_at(&conn, cand)
}

pub(crate) fn lambda_residual_at(conn: &ConnectionEval, cand: &LambdaCandidate) -> Result<ResidualRecord, SystemsError> {
    let n = conn.n;
    let point = &conn.point;
    let l = jets(&cand.lambda, point, &cand.params, n)?;
    let g = |i, j, k| conn.gamma(i, j, k);
    let mut pde = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let terms = [dir(conn, i, &l[j]), -g(j, i, j) * l[i].value, g(j, i, j) * l[j].value];
            pde.push(eq(vec![i, j], &terms));
        }
    }
    let algebraic = algebraic_triples(n)
        .into_iter()
        .map(|[i, j, k]| eq(vec![i, j, k], &[g(j, i, k) * l[i].value, -g(i, j, k) * l[j].value, conn.c(i, j, k) * l[k].value]))
        .collect();
    let closed = match &cand.flux {
        None => None,
        Some(f) => {
            let fj = jets(f, point, &cand.params, n)?;
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for a in 0..n {
                    let df: f64 = (0..n).map(|c| fj[a].grad[c] * conn.r[c][i]).sum();
                    let t = l[i].value * conn.r[a][i];
                    worst = worst.max((df - t).abs() / (1.0 + df.abs() + t.abs()));
                }
            }
            Some(worst)
        }
    };
    Ok(finish(point, pde, algebraic, closed))
}

/// Residual of the cyclic identity
/// `c_jk^i β^i/(λ^j-λ^k) + c_ki^j β^j/(λ^k-λ^i) + c_ij^k β^k/(λ^i-λ^j) = 0`
/// for all `i < j < k`, normalized by one plus the term magnitudes.
pub fn sevennec_identity(
    conn: &ConnectionEval,
    beta: &BetaCandidate,
    lambda: &LambdaCandidate,
    point: &[f64],
) -> Result<f64, SystemsError> {
    let n = conn.n;
    let b = beta.values(point)?;
    let l = lambda.values(point)?;
    let scale = l.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for i in 0..n {
        for j in i + 1..n {
            if (l[i] - l[j]).abs() <= 1e-8 * scale {
                return Err(SystemsError::CoincidentEigenvalues { point: point.to_vec() });
            }
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let terms = [
                    conn.c(j, k, i) * b[i] / (l[j] - l[k]),
                    conn.c(k, i, j) * b[j] / (l[k] - l[i]),
                    conn.c(i, j, k) * b[k] / (l[i] - l[j]),
                ];
                worst = worst.max(eq(vec![i, j, k], &terms).normalized);
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    /// Every `β^i > tol` at every sample.
    StrictEntropy,
    /// Every `β^i >= -tol` at every sample.
    Entropy,
    /// Some `β^i < -tol` with one fixed sign pattern over all samples.
    ExtensionOnly,
    /// The sign pattern changes between samples.
    Indefinite,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub verdict: Convexity,
    /// Per sample, one of `'+'`, `'0'`, `'-'` for each `β^i`.
    pub signatures: Vec<String>,
}

pub fn convexity_classify(cand: &BetaCandidate, samples: &[Vec<f64>], tol: f64) -> Result<ConvexityReport, SystemsError> {
    let mut signatures = Vec::with_capacity(samples.len());
    for p in samples {
        let v = cand.values(p)?;
        signatures.push(
            v.iter()
                .map(|&x| if x > tol { '+' } else if x < -tol { '-' } else { '0' })
                .collect::<String>(),
        );
    }
    let all_pos = signatures.iter().all(|s| s.chars().all(|c| c == '+'));
    let no_neg = signatures.iter().all(|s| !s.contains('-'));
    let verdict = if all_pos {
        Convexity::StrictEntropy
    } else if no_neg {
        Convexity::Entropy
    } else if signatures.windows(2).all(|w| w[0] == w[1]) {
        Convexity::ExtensionOnly
    } else {
        Convexity::Indefinite
    };
    Ok(ConvexityReport { verdict, signatures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{random_frame, FrameSpec};

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn euler_ideal_gas() -> FrameSpec {
        let mut p = Params::new();
        p.insert("gamma".into(), 1.4);
        let c = "sqrt(gamma)*exp(S/2)*v^(-(gamma+1)/2)";
        let m = format!("-{c}");
        let cols = vec![vec!["1", c, "0"], vec!["-exp(S)*v^(-gamma)", "0", "-gamma*exp(S)*v^(-gamma-1)"], vec!["1", m.as_str(), "0"]];
        FrameSpec::parse(&["v", "u", "S"], p, &cols, vec![[1.0, 2.0], [-1.0, 1.0], [0.0, 1.0]], vec![1.5, 0.0, 0.5]).unwrap()
    }

    fn gas_params() -> Params {
        let mut p = Params::new();
        p.insert("gamma".into(), 1.4);
        p
    }

    fn gas_beta() -> BetaCandidate {
        BetaCandidate::parse(
            &s(&["v", "u", "S"]),
            gas_params(),
            &s(&[
                "gamma*exp(S)*v^(-gamma-1)",
                "0.5*gamma*exp(3*S)*v^(-3*gamma-1)/(gamma-1)",
                "gamma*exp(S)*v^(-gamma-1)",
            ]),
            Some("0.5*(exp(S)*v^(1-gamma)/(gamma-1) + u^2/2)"),
        )
        .unwrap()
    }

    fn gas_lambda(lbar: f64, c: f64) -> LambdaCandidate {
        let sp = "sqrt(gamma)*exp(S/2)*v^(-(gamma+1)/2)";
        LambdaCandidate::parse(
            &s(&["v", "u", "S"]),
            gas_params(),
            &[format!("{lbar} - {c}*{sp}"), format!("{lbar}"), format!("{lbar} + {c}*{sp}")],
            None,
        )
        .unwrap()
    }

    #[test]
    fn zero_beta_and_constant_lambda_are_exact() {
        for seed in 0..5 {
            let spec = random_frame(seed, 3);
            for p in spec.samples(5, 0) {
                assert_eq!(beta_residual(&spec, &BetaCandidate::zero(3), &p).unwrap().max_abs, 0.0);
                // the algebraic λ rows cancel only up to rounding
                assert!(lambda_residual(&spec, &LambdaCandidate::constant(3, 2.5), &p).unwrap().max_abs < 1e-14);
            }
        }
    }

    #[test]
    fn ideal_gas_candidates_solve_their_systems() {
        let spec = euler_ideal_gas();
        let beta = gas_beta();
        for p in spec.samples(50, 0) {
            let r = beta_residual(&spec, &beta, &p).unwrap();
            assert!(r.max_abs < 1e-9, "{r:?}");
            let l = lambda_residual(&spec, &gas_lambda(0.0, 1.0), &p).unwrap();
            assert!(l.max_abs < 1e-9);
        }
    }

    #[test]
    fn perturbed_beta_is_rejected() {
        let spec = euler_ideal_gas();
        let mut beta = gas_beta();
        beta.beta[1] = Expr::Mul(Box::new(Expr::Num(1.1)), Box::new(beta.beta[1].clone()));
        let r = beta_residual(&spec, &beta, &[1.5, 0.1, 0.5]).unwrap();
        assert!(r.max_abs > 1e-3);
    }

    #[test]
    fn nonrich_flux_family() {
        let spec = FrameSpec::parse(
            &["u1", "u2", "u3"],
            Params::new(),
            &[vec!["-1", "0", "u2+1"], vec!["u3/(u2^2-1)", "-1", "u1"], vec!["1", "0", "1-u2"]],
            vec![[0.0, 1.0], [1.5, 2.5], [0.0, 1.0]],
            vec![0.5, 2.0, 0.5],
        )
        .unwrap();
        let mut p = Params::new();
        p.insert("C1".into(), 0.7);
        p.insert("C2".into(), -1.3);
        let cand = LambdaCandidate::parse(
            &spec.vars,
            p,
            &s(&["C1 - 2*C2", "C1 + (u2-1)*C2", "C1"]),
            Some(&s(&[
                "(C1 + C2*(u2-1))*u1 + C2*u3",
                "u2*(C1 - C2 + 0.5*C2*u2)",
                "C2*u1*(1-u2^2) - C2*u2*u3 + (C1-C2)*u3",
            ])),
        )
        .unwrap();
        for pt in spec.samples(50, 0) {
            let r = lambda_residual(&spec, &cand, &pt).unwrap();
            assert!(r.max_abs < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn sevennec_on_ideal_gas() {
        let spec = euler_ideal_gas();
        for p in spec.samples(20, 0) {
            let conn = connection_at(&spec, &p).unwrap();
            assert!(sevennec_identity(&conn, &gas_beta(), &gas_lambda(0.0, 1.0), &p).unwrap() < 1e-9);
        }
        let conn = connection_at(&spec, &[1.5, 0.0, 0.5]).unwrap();
        let r = sevennec_identity(&conn, &gas_beta(), &LambdaCandidate::constant(3, 1.0), &[1.5, 0.0, 0.5]);
        assert!(matches!(r, Err(SystemsError::CoincidentEigenvalues { .. })));
    }

    #[test]
    fn convexity_verdicts() {
        let spec = euler_ideal_gas();
        let samples = spec.samples(50, 0);
        assert_eq!(convexity_classify(&gas_beta(), &samples, 1e-8).unwrap().verdict, Convexity::StrictEntropy);
        assert_eq!(convexity_classify(&BetaCandidate::zero(3), &samples, 1e-8).unwrap().verdict, Convexity::Entropy);
        let mut p = Params::new();
        p.insert("K".into(), 2.0);
        let ext = BetaCandidate::parse(&s(&["u1", "u2", "u3"]), p, &s(&["-K*u2", "K*u2", "K"]), None).unwrap();
        let box1 = crate::geometry::halton_points(&[[1.0, 2.0]; 3], 50, 0);
        assert_eq!(convexity_classify(&ext, &box1, 1e-8).unwrap().verdict, Convexity::ExtensionOnly);
        let flip = BetaCandidate::parse(&s(&["u1", "u2", "u3"]), Params::new(), &s(&["u1 - 1.5", "1", "1"]), None).unwrap();
        assert_eq!(convexity_classify(&flip, &box1, 1e-8).unwrap().verdict, Convexity::Indefinite);
    }

    #[test]
    fn rescaled_frame_accepts_rescaled_beta() {
        let spec = euler_ideal_gas();
        let alpha: Vec<Expr> = ["1 + v", "exp(S)", "2"]
            .iter()
            .map(|a| parse_expression(a, &spec.vars, &[]).unwrap())
            .collect();
        let scaled = spec.scale_frame(&alpha).unwrap();
        let beta = gas_beta().scaled(&alpha);
        for p in spec.samples(20, 0) {
            assert!(beta_residual(&scaled, &beta, &p).unwrap().max_abs < 1e-9);
        }
        let wrong = gas_beta();
        assert!(beta_residual(&scaled, &BetaCandidate { eta: None, ..wrong }, &[1.5, 0.1, 0.5]).unwrap().max_abs > 1e-4);
    }

    #[test]
    fn orthonormal_frame_systems_coincide() {
        // cylindrical frame scaled to unit length
        let spec = FrameSpec::parse(
            &["u1", "u2", "u3"],
            Params::new(),
            &[
                vec!["u1/sqrt(u1^2+u2^2)", "u2/sqrt(u1^2+u2^2)", "0"],
                vec!["-u2/sqrt(u1^2+u2^2)", "u1/sqrt(u1^2+u2^2)", "0"],
                vec!["0", "0", "1"],
            ],
            vec![[1.0, 2.0], [1.0, 2.0], [0.0, 1.0]],
            vec![1.5, 1.5, 0.5],
        )
        .unwrap();
        let src = s(&["sin(u1*u2) + u3", "exp(u1 - u3)", "u1^2*u2"]);
        let b = BetaCandidate::parse(&spec.vars, Params::new(), &src, None).unwrap();
        let l = LambdaCandidate::parse(&spec.vars, Params::new(), &src, None).unwrap();
        for p in spec.samples(20, 0) {
            let rb = beta_residual(&spec, &b, &p).unwrap();
            let rl = lambda_residual(&spec, &l, &p).unwrap();
            for (x, y) in rb.pde.iter().zip(&rl.pde).chain(rb.algebraic.iter().zip(&rl.algebraic)) {
                assert_eq!(x.indices, y.indices);
                assert!((x.raw - y.raw).abs() < 1e-12, "{} {}", x.raw, y.raw);
            }
        }
    }
}
