//! Per-example pipeline: identities, richness, ranks, classification,
//! candidate residuals and, when requested, reconstruction and marching.

use super::{Candidate, CandidateData, ExampleCase};
use crate::geometry::FrameSpec;
use crate::classify::{classify, ClassificationReport, ClassifyError};
use crate::exprlang::{eval_jet2, eval_scalar, Params};
use crate::geometry::{check_symmetry_flatness, connection_at, is_rich};
use crate::potential::{
    affine_gauge_compare, affine_gauge_compare_values, entropy_flux, reconstruct_eta, reconstruct_flux, solve_rich_beta,
    BoundaryFn, DarbouxGrid, GridSpec, PotentialError, StaircaseOptions,
};
use crate::systems::{beta_residual, convexity_classify, lambda_residual, sevennec_identity, ResidualRecord, SystemsError};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Thresholds that do not scale with the user tolerance.
const TORSION_TOL: f64 = 1e-10;
const CURVATURE_TOL: f64 = 1e-8;
const ETA_GAUGE_TOL: f64 = 1e-6;
const FLUX_TOL: f64 = 1e-8;
const PATH_TOL: f64 = 1e-7;
const SYMMETRY_TOL: f64 = 1e-8;
const FD_TOL: f64 = 1e-5;
/// Below this a threshold asks for more than double precision delivers.
const PRECISION_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub samples: usize,
    pub tol: f64,
    /// Start index into the Halton sequence.
    pub seed: u64,
    /// Overrides the per-example reconstruction grid.
    pub grid: Option<Vec<usize>>,
    pub quadrature_tol: f64,
    pub reconstruct: bool,
    pub darboux: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { samples: 50, tol: 1e-8, seed: 0, grid: None, quadrature_tol: 1e-10, reconstruct: true, darboux: true }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.samples < 8 {
            return Err(format!("samples must be at least 8 (got {})", self.samples));
        }
        if self.tol.is_nan() || self.tol <= 0.0 || self.quadrature_tol.is_nan() || self.quadrature_tol <= 0.0 {
            return Err("tolerances must be positive".into());
        }
        if self.grid.as_ref().is_some_and(|g| g.iter().any(|&c| c < 2)) {
            return Err("grid counts must be at least 2".into());
        }
        Ok(())
    }

    /// Threshold for candidate residuals.
    pub fn residual_tol(&self) -> f64 {
        0.1 * self.tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Failed only because the requested tolerance is below rounding level.
    PrecisionLimited,
    /// The check could not be evaluated (domain error, degenerate frame).
    Error,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl CheckResult {
    fn measured(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        let status = if value < threshold {
            CheckStatus::Pass
        } else if threshold < PRECISION_FLOOR && value.is_finite() {
            CheckStatus::PrecisionLimited
        } else {
            CheckStatus::Fail
        };
        CheckResult { name: name.into(), status, value: Some(value), threshold: Some(threshold), detail: detail.into() }
    }

    fn equal<T: PartialEq + std::fmt::Debug>(name: impl Into<String>, got: T, want: T) -> Self {
        let status = if got == want { CheckStatus::Pass } else { CheckStatus::Fail };
        CheckResult { name: name.into(), status, value: None, threshold: None, detail: format!("got {got:?}, expected {want:?}") }
    }

    fn error(name: impl Into<String>, err: impl std::fmt::Display, limited: bool) -> Self {
        let status = if limited { CheckStatus::PrecisionLimited } else { CheckStatus::Error };
        CheckResult { name: name.into(), status, value: None, threshold: None, detail: err.to_string() }
    }

    fn skipped(name: impl Into<String>, why: impl Into<String>) -> Self {
        CheckResult { name: name.into(), status: CheckStatus::Skipped, value: None, threshold: None, detail: why.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub checks: Vec<CheckResult>,
    pub classification: Option<ClassificationReport>,
    pub seconds: f64,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| matches!(c.status, CheckStatus::Pass | CheckStatus::Skipped))
    }

    pub fn count(&self, status: CheckStatus) -> usize {
        self.checks.iter().filter(|c| c.status == status).count()
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Largest equation residual with its location, and the largest
/// closed-form mismatch.
fn worst<'a>(records: impl Iterator<Item = &'a ResidualRecord>) -> (f64, f64, String) {
    let mut eq: f64 = -1.0;
    let mut closed: f64 = 0.0;
    let mut at = String::new();
    for r in records {
        let tagged = r.pde.iter().map(|x| ("pde", x)).chain(r.algebraic.iter().map(|x| ("algebraic", x)));
        for (family, x) in tagged {
            if x.normalized > eq {
                eq = x.normalized;
                at = format!("{family} equation {:?} at {:?}", x.indices, r.point);
            }
        }
        closed = closed.max(r.closed_form.unwrap_or(0.0));
    }
    (eq.max(0.0), closed, at)
}

fn potential_limited(e: &PotentialError, cfg: &RunConfig) -> bool {
    matches!(e, PotentialError::QuadratureFailure { .. }) && cfg.quadrature_tol < PRECISION_FLOOR
}

pub fn run_example(case: &ExampleCase, cfg: &RunConfig) -> Verdict {
    let start = Instant::now();
    let spec = &case.spec;
    let samples = spec.samples(cfg.samples, cfg.seed as usize);
    let mut checks = Vec::new();

    // connection identities
    let mut torsion: f64 = 0.0;
    let mut curvature: f64 = 0.0;
    let mut geometry_error = None;
    for p in &samples {
        match check_symmetry_flatness(spec, p) {
            Ok(r) => {
                torsion = torsion.max(r.torsion);
                curvature = curvature.max(r.curvature);
            }
            Err(e) => {
                geometry_error = Some(e);
                break;
            }
        }
    }
    if let Some(e) = geometry_error {
        checks.push(CheckResult::error("frame evaluation", e, false));
        return Verdict { id: case.id.clone(), checks, classification: None, seconds: start.elapsed().as_secs_f64() };
    }
    checks.push(CheckResult::measured("connection symmetry", torsion, TORSION_TOL, "Γ_ij^k - Γ_ji^k against bracket coefficients"));
    checks.push(CheckResult::measured("connection flatness", curvature, CURVATURE_TOL, "curvature of the frame connection"));

    match is_rich(spec, &samples, cfg.tol) {
        Ok((rich, _)) => {
            if let Some(e) = &case.expected {
                checks.push(CheckResult::equal("richness", rich, e.rich));
            }
        }
        Err(e) => checks.push(CheckResult::error("richness", e, false)),
    }

    let classification = match classify(spec, &samples, cfg.tol) {
        Ok(r) => {
            if let Some(e) = &case.expected {
                checks.push(CheckResult::equal("rank of beta algebraic part", r.rank_beta, e.rank_beta));
                checks.push(CheckResult::equal("rank of lambda algebraic part", r.rank_lambda, e.rank_lambda));
                checks.push(CheckResult::equal("lambda case", r.lambda_case, e.lambda_case));
                checks.push(CheckResult::equal("beta case", r.beta_case, e.beta_case));
            }
            Some(r)
        }
        Err(e) => {
            let limited = matches!(e, ClassifyError::InconclusiveVanishing { .. }) && cfg.tol < PRECISION_FLOOR;
            checks.push(CheckResult::error("classification", e, limited));
            None
        }
    };

    checks.extend(candidate_checks(spec, &case.candidates, &samples, cfg));

    if cfg.reconstruct {
        if let Some(r) = &case.reconstruct {
            reconstruction_checks(case, r, cfg, &mut checks);
        }
    }
    if cfg.darboux {
        if let Some(d) = &case.darboux {
            checks.extend(darboux_checks(case, d));
        }
    }
    Verdict { id: case.id.clone(), checks, classification, seconds: start.elapsed().as_secs_f64() }
}

/// Residual, closed-form, convexity and cyclic-identity checks for
/// `candidates` on `spec` at `samples`.
pub fn candidate_checks(spec: &FrameSpec, candidates: &[Candidate], samples: &[Vec<f64>], cfg: &RunConfig) -> Vec<CheckResult> {
    let mut checks = Vec::new();
    let rtol = cfg.residual_tol();
    let mut verified = vec![false; candidates.len()];
    for (k, cand) in candidates.iter().enumerate() {
        let name = format!("residual: {}", cand.label);
        let records: Result<Vec<ResidualRecord>, SystemsError> = samples
            .iter()
            .map(|p| match &cand.data {
                CandidateData::Beta(b) => beta_residual(spec, b, p),
                CandidateData::Lambda(l) => lambda_residual(spec, l, p),
            })
            .collect();
        match records {
            Ok(recs) => {
                let (eq, closed, at) = worst(recs.iter());
                let kind = match cand.data {
                    CandidateData::Beta(_) => "beta-system",
                    CandidateData::Lambda(_) => "lambda-system",
                };
                let c = CheckResult::measured(&name, eq, rtol, format!("{kind}, worst: {at}"));
                verified[k] = c.status == CheckStatus::Pass;
                checks.push(c);
                let has_closed = match &cand.data {
                    CandidateData::Beta(b) => b.eta.is_some(),
                    CandidateData::Lambda(l) => l.flux.is_some(),
                };
                if has_closed {
                    checks.push(CheckResult::measured(format!("closed form: {}", cand.label), closed, rtol, "pointwise identity of the supplied potential"));
                }
            }
            Err(e) => checks.push(CheckResult::error(&name, e, false)),
        }
        if let (Some(want), CandidateData::Beta(b)) = (cand.convexity, &cand.data) {
            match convexity_classify(b, samples, cfg.tol) {
                Ok(r) => checks.push(CheckResult::equal(format!("convexity: {}", cand.label), r.verdict, want)),
                Err(e) => checks.push(CheckResult::error(format!("convexity: {}", cand.label), e, false)),
            }
        }
    }

    // cyclic identity for strictly hyperbolic pairs
    if spec.n >= 3 {
        for (i, bc) in candidates.iter().enumerate() {
            let CandidateData::Beta(b) = &bc.data else { continue };
            for (j, lc) in candidates.iter().enumerate() {
                let CandidateData::Lambda(l) = &lc.data else { continue };
                let name = format!("cyclic identity: {} / {}", bc.label, lc.label);
                if !(verified[i] && verified[j]) {
                    checks.push(CheckResult::skipped(name, "candidate not verified"));
                    continue;
                }
                let mut worst_v: f64 = 0.0;
                let mut outcome = Ok(());
                for p in samples {
                    match connection_at(spec, p).map_err(SystemsError::from).and_then(|c| sevennec_identity(&c, b, l, p)) {
                        Ok(v) => worst_v = worst_v.max(v),
                        Err(e) => {
                            outcome = Err(e);
                            break;
                        }
                    }
                }
                match outcome {
                    Ok(()) => checks.push(CheckResult::measured(name, worst_v, rtol, "strictly hyperbolic pair")),
                    Err(SystemsError::CoincidentEigenvalues { .. }) => checks.push(CheckResult::skipped(name, "eigenvalues coincide")),
                    Err(e) => checks.push(CheckResult::error(name, e, false)),
                }
            }
        }
    }

    checks
}

fn reconstruction_checks(case: &ExampleCase, r: &super::ReconstructFile, cfg: &RunConfig, checks: &mut Vec<CheckResult>) {
    let spec = &case.spec;
    let counts = cfg.grid.clone().filter(|g| g.len() == spec.n).unwrap_or_else(|| r.grid.clone());
    let grid = GridSpec::uniform(&spec.domain, &counts);
    let opts = StaircaseOptions { abs_tol: cfg.quadrature_tol, ..StaircaseOptions::default() };
    let base = &spec.base_point;
    let cand = &case.candidates[r.candidate];
    match &cand.data {
        CandidateData::Beta(b) => {
            let name = format!("eta reconstruction: {}", cand.label);
            let out = match reconstruct_eta(spec, b, base, &grid, &opts) {
                Ok(o) => o,
                Err(e) => {
                    checks.push(CheckResult::error(name, &e, potential_limited(&e, cfg)));
                    return;
                }
            };
            checks.push(CheckResult::measured(format!("{name}: path independence"), out.path_residual, PATH_TOL, "two staircase orders"));
            checks.push(CheckResult::measured(format!("{name}: symmetry"), out.symmetry_residual, SYMMETRY_TOL, "Hessian symmetry"));
            if let Some(eta) = &b.eta {
                match affine_gauge_compare(&out, eta, &b.params) {
                    Ok(v) => checks.push(CheckResult::measured(format!("{name}: closed form"), v, ETA_GAUGE_TOL, "after least-squares affine fit")),
                    Err(e) => checks.push(CheckResult::error(format!("{name}: closed form"), e, false)),
                }
            }
            if let Some(qi) = r.entropy_flux {
                let lc = &case.candidates[qi];
                let CandidateData::Lambda(l) = &lc.data else { return };
                let qname = format!("entropy flux: {}", lc.label);
                match entropy_flux(spec, l, b, base, &grid, &opts) {
                    Ok(q) => {
                        checks.push(CheckResult::measured(format!("{qname}: path independence"), q.path_residual, PATH_TOL, "two staircase orders"));
                        if let (Some(cq), Some(f), Some(eta)) = (&lc.closed_q, &l.flux, &b.eta) {
                            match closed_q_residual(&q, cq, f, eta, &l.params, &b.params, base) {
                                Ok(v) => checks.push(CheckResult::measured(format!("{qname}: closed form"), v, ETA_GAUGE_TOL, "after gauge correction and affine fit")),
                                Err(e) => checks.push(CheckResult::error(format!("{qname}: closed form"), e, false)),
                            }
                        }
                    }
                    Err(e) => checks.push(CheckResult::error(qname, &e, potential_limited(&e, cfg))),
                }
            }
        }
        CandidateData::Lambda(l) => {
            let name = format!("flux reconstruction: {}", cand.label);
            let out = match reconstruct_flux(spec, l, base, &grid, &opts) {
                Ok(o) => o,
                Err(e) => {
                    checks.push(CheckResult::error(name, &e, potential_limited(&e, cfg)));
                    return;
                }
            };
            checks.push(CheckResult::measured(format!("{name}: path independence"), out.path_residual, PATH_TOL, "two staircase orders"));
            if let Some(f) = &l.flux {
                match flux_mismatch(&out, f, &l.params, base) {
                    Ok(v) => checks.push(CheckResult::measured(format!("{name}: closed form"), v, FLUX_TOL, "after constant shift")),
                    Err(e) => checks.push(CheckResult::error(format!("{name}: closed form"), e, false)),
                }
            }
        }
    }
}

/// `max |f_grid - (F(u) - F(base))|`.
pub fn flux_mismatch(
    out: &crate::potential::PotentialGrid,
    f: &[crate::exprlang::Expr],
    params: &Params,
    base: &[f64],
) -> Result<f64, PotentialError> {
    let grid = out.grid();
    let vals = out.vector.as_ref().ok_or_else(|| PotentialError::Invalid("grid has no vector field".into()))?;
    let f0: Vec<f64> = f.iter().map(|e| eval_scalar(e, base, params)).collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    for (k, p) in grid.points().iter().enumerate() {
        for (i, e) in f.iter().enumerate() {
            worst = worst.max((vals[k][i] - (eval_scalar(e, p, params)? - f0[i])).abs());
        }
    }
    Ok(worst)
}

/// The gauged `η` differs from the closed form by `a·u + b` with
/// `a = ∇η(base)`, which shifts `q` by `a·f`.
fn closed_q_residual(
    q: &crate::potential::PotentialGrid,
    closed_q: &crate::exprlang::Expr,
    f: &[crate::exprlang::Expr],
    eta: &crate::exprlang::Expr,
    lparams: &Params,
    bparams: &Params,
    base: &[f64],
) -> Result<f64, PotentialError> {
    let a = eval_jet2(eta, base, bparams)?.grad;
    let pts = q.grid().points();
    let target: Vec<f64> = pts
        .iter()
        .map(|p| {
            let mut v = eval_scalar(closed_q, p, lparams)?;
            for (ai, fi) in a.iter().zip(f) {
                v -= ai * eval_scalar(fi, p, lparams)?;
            }
            Ok(v)
        })
        .collect::<Result<_, PotentialError>>()?;
    let vals = q.scalar.as_ref().ok_or_else(|| PotentialError::Invalid("grid has no scalar field".into()))?;
    Ok(affine_gauge_compare_values(&pts, vals, &target))
}

fn darboux_checks(case: &ExampleCase, d: &super::DarbouxSetup) -> Vec<CheckResult> {
    let spec = &case.spec;
    let name = "Darboux march";
    let Some(chart) = &spec.chart else {
        return vec![CheckResult::skipped(name, "no chart")];
    };
    let grid = match DarbouxGrid::new(&d.lo, &d.hi, d.h, &d.base) {
        Ok(g) => g,
        Err(e) => return vec![CheckResult::error(name, e, false)],
    };
    let boundary: Vec<BoundaryFn> = d.boundary.iter().map(|e| BoundaryFn::Expr { expr: e.clone(), params: spec.params.clone() }).collect();
    let sol = match solve_rich_beta(spec, chart, &boundary, &grid) {
        Ok(s) => s,
        Err(e) => return vec![CheckResult::error(name, e, false)],
    };
    let mut out = vec![CheckResult::measured(
        format!("{name}: finite-difference residual"),
        sol.fd_residual,
        FD_TOL,
        format!("{} sweeps, h = {}", sol.iterations, d.h),
    )];
    if let Some(closed) = &d.closed {
        let gs = grid.spec();
        let mut err: f64 = 0.0;
        for f in 0..gs.len() {
            let w = gs.point(f);
            for (j, e) in closed.iter().enumerate() {
                match eval_scalar(e, &w, &spec.params) {
                    Ok(v) => err = err.max((sol.gamma[f][j] - v).abs()),
                    Err(e) => return vec![CheckResult::error(name, e, false)],
                }
            }
        }
        out.push(CheckResult::measured(format!("{name}: closed form"), err, d.tol, "max nodal error"));
    }
    out
}
