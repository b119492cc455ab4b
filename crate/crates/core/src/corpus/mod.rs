//! Bundled example frames with candidates and expected verdicts, plus a
//! runner for the whole pipeline.
//!
//! One JSON document per example.  The bundled directory is
//! `crates/core/corpus`; `EIGENFRAME_CORPUS` points elsewhere.

mod runner;
pub mod suites;

pub use runner::{candidate_checks, flux_mismatch, run_example, CheckResult, CheckStatus, RunConfig, Verdict};

use crate::classify::{BetaCase, LambdaCase};
use crate::exprlang::{parse_expression, Expr, ExprError, Params};
use crate::geometry::{FrameSpec, GeometryError, RiemannChart};
use crate::systems::{BetaCandidate, Convexity, LambdaCandidate};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CORPUS_ENV: &str = "EIGENFRAME_CORPUS";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: schema error: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: parse error at {location}: {source}")]
    Parse { path: PathBuf, location: String, source: ExprError },
    #[error("{path}: {source}")]
    Geometry { path: PathBuf, source: GeometryError },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainFile {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartFile {
    pub w_vars: Vec<String>,
    pub w: Vec<String>,
    pub u_inv: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    Beta,
    Lambda,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateFile {
    pub kind: CandidateKind,
    pub exprs: Vec<String>,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_eta: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_f: Option<Vec<String>>,
    /// Entropy flux belonging to this `λ` and the reconstructed `β`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_q: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convexity: Option<Convexity>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub rich: bool,
    pub rank_beta: usize,
    pub rank_lambda: usize,
    pub lambda_case: LambdaCase,
    pub beta_case: BetaCase,
    #[serde(default)]
    pub case_tag: String,
}

/// Grid reconstruction request.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructFile {
    /// Index into `candidates`.
    pub candidate: usize,
    pub grid: Vec<usize>,
    /// Index of a `λ` candidate whose entropy flux is reconstructed with
    /// `candidate` as `β`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_flux: Option<usize>,
}

/// Marching request in Riemann coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarbouxFile {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: f64,
    pub base: Vec<f64>,
    /// Data on the base lines, in the variable `t`.
    pub boundary: Vec<String>,
    /// Closed-form `γ` in the chart variables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed: Option<Vec<String>>,
    pub tol: f64,
}

/// On-disk form of an example.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleFile {
    pub id: String,
    pub n: usize,
    pub vars: Vec<String>,
    #[serde(default)]
    pub params: Params,
    pub frame: Vec<Vec<String>>,
    pub domain: DomainFile,
    pub base: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartFile>,
    #[serde(default)]
    pub candidates: Vec<CandidateFile>,
    /// Required for bundled examples, optional for user frame files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruct: Option<ReconstructFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub darboux: Option<DarbouxFile>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub enum CandidateData {
    Beta(BetaCandidate),
    Lambda(LambdaCandidate),
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub label: String,
    pub data: CandidateData,
    pub closed_q: Option<Expr>,
    pub convexity: Option<Convexity>,
}

#[derive(Clone, Debug)]
pub struct DarbouxSetup {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: f64,
    pub base: Vec<f64>,
    pub boundary: Vec<Expr>,
    pub closed: Option<Vec<Expr>>,
    pub tol: f64,
}

/// A loaded, compiled example.
#[derive(Clone, Debug)]
pub struct ExampleCase {
    pub id: String,
    pub path: PathBuf,
    pub spec: FrameSpec,
    pub candidates: Vec<Candidate>,
    pub expected: Option<Expected>,
    pub reconstruct: Option<ReconstructFile>,
    pub darboux: Option<DarbouxSetup>,
    pub notes: Vec<String>,
}

struct Ctx<'a> {
    path: &'a Path,
}

impl Ctx<'_> {
    fn schema<T>(&self, message: impl Into<String>) -> Result<T, CorpusError> {
        Err(CorpusError::Schema { path: self.path.to_path_buf(), message: message.into() })
    }

    fn expr(&self, src: &str, vars: &[String], params: &Params, location: String) -> Result<Expr, CorpusError> {
        let names: Vec<String> = params.keys().cloned().collect();
        parse_expression(src, vars, &names).map_err(|source| CorpusError::Parse { path: self.path.to_path_buf(), location, source })
    }

    fn exprs(&self, src: &[String], vars: &[String], params: &Params, at: &str) -> Result<Vec<Expr>, CorpusError> {
        src.iter().enumerate().map(|(i, s)| self.expr(s, vars, params, format!("{at}[{i}]"))).collect()
    }

    fn geometry(&self, source: GeometryError) -> CorpusError {
        CorpusError::Geometry { path: self.path.to_path_buf(), source }
    }
}

/// Compile a parsed document; `path` is used in error messages only.
pub fn compile_example(file: ExampleFile, path: &Path) -> Result<ExampleCase, CorpusError> {
    let cx = Ctx { path };
    let n = file.n;
    if file.vars.len() != n {
        return cx.schema(format!("{} variables for n = {n}", file.vars.len()));
    }
    if file.frame.len() != n || file.frame.iter().any(|c| c.len() != n) {
        return cx.schema(format!("frame must be {n} vectors of {n} components"));
    }
    if file.domain.lo.len() != n || file.domain.hi.len() != n || file.base.len() != n {
        return cx.schema("domain bounds and base point must have n entries");
    }
    let frame = file
        .frame
        .iter()
        .enumerate()
        .map(|(j, col)| cx.exprs(col, &file.vars, &file.params, &format!("frame[{j}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let domain: Vec<[f64; 2]> = file.domain.lo.iter().zip(&file.domain.hi).map(|(&a, &b)| [a, b]).collect();
    let mut spec =
        FrameSpec::new(file.vars.clone(), file.params.clone(), frame, domain, file.base.clone()).map_err(|e| cx.geometry(e))?;
    if let Some(c) = &file.chart {
        if c.w_vars.len() != n || c.w.len() != n || c.u_inv.len() != n || c.scaling.as_ref().is_some_and(|s| s.len() != n) {
            return cx.schema("chart lists must have n entries");
        }
        // compile first for located errors
        cx.exprs(&c.w, &file.vars, &file.params, "chart.w")?;
        cx.exprs(&c.u_inv, &c.w_vars, &file.params, "chart.u_inv")?;
        if let Some(s) = &c.scaling {
            cx.exprs(s, &file.vars, &file.params, "chart.scaling")?;
        }
        let chart = RiemannChart::parse(&file.vars, &c.w_vars, &file.params, &c.w, &c.u_inv, c.scaling.as_deref())
            .map_err(|e| cx.geometry(e))?;
        spec.chart = Some(chart);
    }
    let candidates = file
        .candidates
        .iter()
        .enumerate()
        .map(|(k, c)| compile_candidate(&cx, c, k, &file.vars, &file.params))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(r) = &file.reconstruct {
        if r.candidate >= candidates.len() || r.grid.len() != n || r.grid.iter().any(|&g| g < 2) {
            return cx.schema("reconstruct needs a valid candidate index and n grid counts of at least 2");
        }
        if let Some(q) = r.entropy_flux {
            let ok = matches!(candidates.get(q).map(|c| &c.data), Some(CandidateData::Lambda(_)))
                && matches!(candidates[r.candidate].data, CandidateData::Beta(_));
            if !ok {
                return cx.schema("entropy_flux must pair a beta candidate with a lambda candidate");
            }
        }
    }
    let darboux = match &file.darboux {
        None => None,
        Some(d) => {
            if d.lo.len() != n || d.hi.len() != n || d.base.len() != n || d.boundary.len() != n {
                return cx.schema("darboux lists must have n entries");
            }
            let Some(c) = &file.chart else {
                return cx.schema("darboux requires a chart");
            };
            let t = vec!["t".to_string()];
            Some(DarbouxSetup {
                lo: d.lo.clone(),
                hi: d.hi.clone(),
                h: d.h,
                base: d.base.clone(),
                boundary: cx.exprs(&d.boundary, &t, &file.params, "darboux.boundary")?,
                closed: d.closed.as_ref().map(|c2| cx.exprs(c2, &c.w_vars, &file.params, "darboux.closed")).transpose()?,
                tol: d.tol,
            })
        }
    };
    Ok(ExampleCase {
        id: file.id,
        path: path.to_path_buf(),
        spec,
        candidates,
        expected: file.expected,
        reconstruct: file.reconstruct,
        darboux,
        notes: file.notes,
    })
}

fn compile_candidate(cx: &Ctx, c: &CandidateFile, k: usize, vars: &[String], base_params: &Params) -> Result<Candidate, CorpusError> {
    let n = vars.len();
    let at = format!("candidates[{k}]");
    if c.exprs.len() != n {
        return cx.schema(format!("{at} has {} expressions for n = {n}", c.exprs.len()));
    }
    let mut params = base_params.clone();
    params.extend(c.params.clone());
    let exprs = cx.exprs(&c.exprs, vars, &params, &format!("{at}.exprs"))?;
    let closed_q = c.closed_q.as_ref().map(|q| cx.expr(q, vars, &params, format!("{at}.closed_q"))).transpose()?;
    let data = match c.kind {
        CandidateKind::Beta => {
            if c.closed_f.is_some() || c.closed_q.is_some() {
                return cx.schema(format!("{at}: closed_f and closed_q belong to lambda candidates"));
            }
            let eta = c.closed_eta.as_ref().map(|e| cx.expr(e, vars, &params, format!("{at}.closed_eta"))).transpose()?;
            CandidateData::Beta(BetaCandidate { beta: exprs, eta, params })
        }
        CandidateKind::Lambda => {
            if c.closed_eta.is_some() || c.convexity.is_some() {
                return cx.schema(format!("{at}: closed_eta and convexity belong to beta candidates"));
            }
            let flux = match &c.closed_f {
                Some(f) if f.len() != n => return cx.schema(format!("{at}.closed_f needs {n} components")),
                Some(f) => Some(cx.exprs(f, vars, &params, &format!("{at}.closed_f"))?),
                None => None,
            };
            CandidateData::Lambda(LambdaCandidate { lambda: exprs, flux, params })
        }
    };
    Ok(Candidate { label: c.label.clone().unwrap_or_else(|| format!("candidate {k}")), data, closed_q, convexity: c.convexity })
}

/// Candidates from a separate file (one object or a list), compiled
/// against the variables and parameters of `spec`.
pub fn load_candidates(path: &Path, spec: &FrameSpec) -> Result<Vec<Candidate>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    parse_candidates(&text, path, spec)
}

pub fn parse_candidates(text: &str, path: &Path, spec: &FrameSpec) -> Result<Vec<Candidate>, CorpusError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(CandidateFile),
        Many(Vec<CandidateFile>),
    }
    let files = match serde_json::from_str(text) {
        Ok(OneOrMany::One(c)) => vec![c],
        Ok(OneOrMany::Many(v)) => v,
        Err(e) => return Err(CorpusError::Schema { path: path.to_path_buf(), message: e.to_string() }),
    };
    let cx = Ctx { path };
    files.iter().enumerate().map(|(k, c)| compile_candidate(&cx, c, k, &spec.vars, &spec.params)).collect()
}

pub fn parse_example(text: &str, path: &Path) -> Result<ExampleCase, CorpusError> {
    let file: ExampleFile =
        serde_json::from_str(text).map_err(|e| CorpusError::Schema { path: path.to_path_buf(), message: e.to_string() })?;
    compile_example(file, path)
}

pub fn load_example(path: &Path) -> Result<ExampleCase, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    parse_example(&text, path)
}

/// The corpus directory: `EIGENFRAME_CORPUS` if set, else the bundled one.
pub fn corpus_dir() -> PathBuf {
    std::env::var_os(CORPUS_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus"))
}

/// `*.json` files directly in `dir`, in natural id order.
pub fn example_paths(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let rd = match std::fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => return Err(CorpusError::Io { path: dir.to_path_buf(), source }),
    };
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?;
        let p = entry.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "json") {
            out.push(p);
        }
    }
    out.sort_by_key(|p| natural_key(&p.file_stem().unwrap_or_default().to_string_lossy()));
    Ok(out)
}

/// Digit runs compare numerically, so `ex6.9` sorts before `ex6.10`.
fn natural_key(s: &str) -> Vec<(u64, String)> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        let mut run = String::new();
        let digits = c.is_ascii_digit();
        while let Some(&d) = chars.peek() {
            if d.is_ascii_digit() != digits {
                break;
            }
            run.push(d);
            chars.next();
        }
        out.push(if digits { (run.parse().unwrap_or(u64::MAX), String::new()) } else { (0, run) });
    }
    out
}

/// Every example in `dir`; each must carry an `expected` block.
pub fn load_dir(dir: &Path) -> Result<Vec<ExampleCase>, CorpusError> {
    example_paths(dir)?
        .iter()
        .map(|p| {
            let case = load_example(p)?;
            if case.expected.is_none() {
                return Err(CorpusError::Schema { path: p.clone(), message: "bundled examples need an expected block".into() });
            }
            Ok(case)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    pub n: usize,
    pub rich: bool,
    pub beta_case: BetaCase,
    pub lambda_case: LambdaCase,
    pub case_tag: String,
    pub candidates: usize,
}

pub fn list_examples(dir: &Path) -> Result<Vec<CatalogEntry>, CorpusError> {
    Ok(load_dir(dir)?
        .into_iter()
        .map(|c| {
            let e = c.expected.expect("load_dir checks expected");
            CatalogEntry {
                id: c.id,
                n: c.spec.n,
                rich: e.rich,
                beta_case: e.beta_case,
                lambda_case: e.lambda_case,
                case_tag: e.case_tag,
                candidates: c.candidates.len(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests;
