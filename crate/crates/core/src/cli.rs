//! Command-line front end.
//!
//! Exit codes: 0 pass, 1 mathematical failure, 2 input error, 3 numerical
//! degeneracy (singular frame or an unevaluable check).

use crate::classify::{classify, ClassificationReport, ClassifyError};
use crate::corpus::{
    candidate_checks, corpus_dir, list_examples, load_candidates, load_dir, load_example, run_example, suites, Candidate,
    CandidateData, CatalogEntry, CheckResult, CheckStatus, CorpusError, ExampleCase, RunConfig, Verdict,
};
use crate::geometry::{connection_at, is_rich, GeometryError};
use crate::potential::{
    affine_gauge_compare, reconstruct_eta, reconstruct_flux, write_csv, write_json, GridSpec, PotentialError, PotentialGrid,
    StaircaseOptions,
};
use crate::systems::SystemsError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

const DEFAULT_GRID: usize = 11;

#[derive(Parser, Debug)]
#[command(name = "eigenframe", version, about = "Analyze eigen-frames and verify extension and flux candidates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Args, Debug, Clone)]
pub struct Opts {
    /// Number of Halton sample points (at least 8).
    #[arg(long, global = true, default_value_t = 50)]
    pub samples: usize,
    /// Vanishing tolerance; candidate residuals must stay below a tenth of it.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
    /// Start index into the Halton sequence.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Grid node counts per axis, e.g. 11,11,11.
    #[arg(long, global = true, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    pub output: Output,
    /// Absolute tolerance of the adaptive quadrature.
    #[arg(long = "quadrature-tol", global = true, default_value_t = 1e-10)]
    pub quadrature_tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Richness, connection tables, ranks and case classification of a frame file.
    Analyze { file: PathBuf },
    /// Check candidates against the extension (β) and flux (λ) systems.
    Verify {
        file: PathBuf,
        /// Candidate file (one object or a list); defaults to the candidates in FILE.
        candidates: Option<PathBuf>,
    },
    /// Reconstruct η from a β candidate, or f from a λ candidate with --flux.
    Reconstruct {
        file: PathBuf,
        candidates: Option<PathBuf>,
        /// Reconstruct the flux from a λ candidate.
        #[arg(long)]
        flux: bool,
        /// Which candidate of the requested kind to use (zero-based).
        #[arg(long)]
        index: Option<usize>,
        /// Directory for the CSV and JSON grids.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run every bundled example and the property suites.
    Selftest {
        /// Skip the random-frame property suites.
        #[arg(long)]
        no_suites: bool,
    },
    /// List the bundled examples.
    List,
}

impl Opts {
    pub fn config(&self) -> RunConfig {
        RunConfig {
            samples: self.samples,
            tol: self.tol,
            seed: self.seed,
            grid: self.grid.clone(),
            quadrature_tol: self.quadrature_tol,
            reconstruct: true,
            darboux: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub id: String,
    pub n: usize,
    pub base_point: Vec<f64>,
    pub richness: bool,
    /// `gamma[i][j][k] = Γ_ij^k` at the base point.
    pub gamma: Vec<Vec<Vec<f64>>>,
    /// `c[i][j][k] = c_ij^k` at the base point.
    pub c: Vec<Vec<Vec<f64>>>,
    pub classification: ClassificationReport,
    pub summary: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub id: String,
    pub samples: usize,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructReport {
    pub id: String,
    pub candidate: String,
    pub potential: String,
    pub grid: Vec<usize>,
    pub files: Vec<PathBuf>,
    pub curl_residual: f64,
    pub path_residual: f64,
    pub symmetry_residual: f64,
    pub quadrature_panels: usize,
    pub quadrature_error: f64,
    /// Mismatch against the closed form, if the candidate carries one.
    pub closed_form_error: Option<f64>,
    pub closed_form_threshold: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub verdicts: Vec<Verdict>,
    pub suites: Vec<CheckResult>,
    pub passed: usize,
    pub failed: usize,
    pub precision_limited: usize,
    pub seconds: f64,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(e: impl std::fmt::Display) -> Self {
        CliError { code: EXIT_INPUT, message: e.to_string() }
    }
    fn degenerate(e: impl std::fmt::Display) -> Self {
        CliError { code: EXIT_DEGENERATE, message: e.to_string() }
    }
    fn fail(e: impl std::fmt::Display) -> Self {
        CliError { code: EXIT_FAIL, message: e.to_string() }
    }
}

fn geometry_error(e: GeometryError) -> CliError {
    match e {
        GeometryError::SingularFrame { .. } | GeometryError::ZeroScaling { .. } => CliError::degenerate(e),
        GeometryError::Invalid(_) => CliError::input(e),
        _ => CliError::degenerate(e),
    }
}

fn systems_error(e: SystemsError) -> CliError {
    match e {
        SystemsError::Geometry(g) => geometry_error(g),
        SystemsError::Dimension { .. } => CliError::input(e),
        _ => CliError::degenerate(e),
    }
}

fn classify_error(e: ClassifyError) -> CliError {
    match e {
        ClassifyError::Geometry(g) => geometry_error(g),
        ClassifyError::Systems(s) => systems_error(s),
        _ => CliError::degenerate(e),
    }
}

fn potential_error(e: PotentialError) -> CliError {
    match e {
        PotentialError::Geometry(g) => geometry_error(g),
        PotentialError::Systems(s) => systems_error(s),
        PotentialError::Invalid(_) => CliError::input(e),
        PotentialError::Expr(_) | PotentialError::StepFailure(_) => CliError::degenerate(e),
        _ => CliError::fail(e),
    }
}

fn corpus_error(e: CorpusError) -> CliError {
    match e {
        CorpusError::Geometry { source: GeometryError::SingularFrame { .. }, .. } => CliError::degenerate(e),
        _ => CliError::input(e),
    }
}

/// Fails with exit 3 if the frame is singular at the base point or any sample.
fn preflight(case: &ExampleCase, samples: &[Vec<f64>]) -> Result<(), CliError> {
    for p in std::iter::once(&case.spec.base_point).chain(samples) {
        connection_at(&case.spec, p).map_err(geometry_error)?;
    }
    Ok(())
}

fn status_word(s: CheckStatus) -> &'static str {
    match s {
        CheckStatus::Pass => "PASS",
        CheckStatus::Fail => "FAIL",
        CheckStatus::PrecisionLimited => "LIMIT",
        CheckStatus::Error => "ERROR",
        CheckStatus::Skipped => "SKIP",
    }
}

fn check_line(c: &CheckResult) -> String {
    let mut s = format!("  {:5} {}", status_word(c.status), c.name);
    match (c.value, c.threshold) {
        (Some(v), Some(t)) => s.push_str(&format!(": {v:.3e} (limit {t:.1e})")),
        (Some(v), None) => s.push_str(&format!(": {v:.3e}")),
        _ => {}
    }
    if !c.detail.is_empty() && c.status != CheckStatus::Pass {
        s.push_str(&format!(" [{}]", c.detail));
    }
    s
}

fn checks_code(checks: &[CheckResult]) -> i32 {
    if checks.iter().any(|c| matches!(c.status, CheckStatus::Fail | CheckStatus::PrecisionLimited)) {
        EXIT_FAIL
    } else if checks.iter().any(|c| c.status == CheckStatus::Error) {
        EXIT_DEGENERATE
    } else {
        EXIT_PASS
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, output: Output, report: &T, text: impl FnOnce() -> String) -> Result<(), CliError> {
    let s = match output {
        Output::Json => serde_json::to_string_pretty(report).map_err(CliError::input)?,
        Output::Text => text(),
    };
    writeln!(out, "{s}").map_err(CliError::input)
}

fn table(name: &str, t: &[Vec<Vec<f64>>]) -> String {
    let mut s = String::new();
    for (i, ti) in t.iter().enumerate() {
        for (j, tij) in ti.iter().enumerate() {
            let row: Vec<String> = tij.iter().map(|v| format!("{v:>10.5}")).collect();
            s.push_str(&format!("  {name}_{}{}^k = [{}]\n", i + 1, j + 1, row.join(", ")));
        }
    }
    s
}

pub fn analyze(case: &ExampleCase, cfg: &RunConfig) -> Result<AnalyzeReport, CliError> {
    let spec = &case.spec;
    let samples = spec.samples(cfg.samples, cfg.seed as usize);
    preflight(case, &samples)?;
    let conn = connection_at(spec, &spec.base_point).map_err(geometry_error)?;
    let n = spec.n;
    let cube = |f: &dyn Fn(usize, usize, usize) -> f64| -> Vec<Vec<Vec<f64>>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| f(i, j, k)).collect()).collect()).collect()
    };
    let gamma = cube(&|i, j, k| conn.gamma(i, j, k));
    let c = cube(&|i, j, k| conn.c(i, j, k));
    let (richness, _) = is_rich(spec, &samples, cfg.tol).map_err(geometry_error)?;
    let classification = classify(spec, &samples, cfg.tol).map_err(classify_error)?;
    let summary = format!(
        "{}, rank {}, Case {} / {}, {}",
        if richness { "rich" } else { "non-rich" },
        classification.rank_beta,
        classification.lambda_case.label(),
        classification.beta_case.label(),
        classification.freedom
    );
    Ok(AnalyzeReport { id: case.id.clone(), n, base_point: spec.base_point.clone(), richness, gamma, c, classification, summary })
}

fn analyze_text(r: &AnalyzeReport) -> String {
    let cl = &r.classification;
    let mut s = format!("{}: {}\n", r.id, r.summary);
    s.push_str(&format!("dimension {}, base point {:?}\n", r.n, r.base_point));
    s.push_str(&format!("rank of algebraic part: beta {}, lambda {}\n", cl.rank_beta, cl.rank_lambda));
    s.push_str("connection coefficients at base point:\n");
    s.push_str(&table("Γ", &r.gamma));
    s.push_str("structure coefficients at base point:\n");
    s.push_str(&table("c", &r.c));
    if cl.permutation.iter().enumerate().any(|(a, &b)| a != b) {
        s.push_str(&format!("relabeling: {:?}\n", cl.permutation));
    }
    s.push_str("trace:\n");
    for t in &cl.trace {
        match t.value {
            Some(v) => s.push_str(&format!("  {}: {v:.3e} -> {}\n", t.condition, t.verdict)),
            None => s.push_str(&format!("  {}: {}\n", t.condition, t.verdict)),
        }
    }
    s.trim_end().to_string()
}

pub fn verify(case: &ExampleCase, candidates: &[Candidate], cfg: &RunConfig) -> Result<VerifyReport, CliError> {
    let samples = case.spec.samples(cfg.samples, cfg.seed as usize);
    preflight(case, &samples)?;
    if candidates.is_empty() {
        return Err(CliError::input("no candidates to verify"));
    }
    let checks = candidate_checks(&case.spec, candidates, &samples, cfg);
    let passed = checks_code(&checks) == EXIT_PASS;
    Ok(VerifyReport { id: case.id.clone(), samples: samples.len(), checks, passed })
}

fn pick_candidate<'a>(
    case: &'a ExampleCase,
    candidates: &'a [Candidate],
    flux: bool,
    index: Option<usize>,
) -> Result<&'a Candidate, CliError> {
    let of_kind: Vec<(usize, &Candidate)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c.data, CandidateData::Lambda(_)) == flux)
        .collect();
    let kind = if flux { "lambda" } else { "beta" };
    if let Some(i) = index {
        return of_kind.get(i).map(|x| x.1).ok_or_else(|| CliError::input(format!("no {kind} candidate with index {i}")));
    }
    let preferred = case.reconstruct.as_ref().map(|r| r.candidate);
    of_kind
        .iter()
        .find(|(k, _)| std::ptr::eq(candidates, case.candidates.as_slice()) && Some(*k) == preferred)
        .or(of_kind.first())
        .map(|x| x.1)
        .ok_or_else(|| CliError::input(format!("no {kind} candidate available (use --flux for lambda candidates)")))
}

pub fn reconstruct(
    case: &ExampleCase,
    candidates: &[Candidate],
    flux: bool,
    index: Option<usize>,
    out_dir: Option<&Path>,
    cfg: &RunConfig,
) -> Result<(ReconstructReport, PotentialGrid), CliError> {
    let spec = &case.spec;
    preflight(case, &spec.samples(cfg.samples.min(8), cfg.seed as usize))?;
    let cand = pick_candidate(case, candidates, flux, index)?;
    let counts = match &cfg.grid {
        Some(g) if g.len() != spec.n => return Err(CliError::input(format!("--grid needs {} counts", spec.n))),
        Some(g) => g.clone(),
        None => case.reconstruct.as_ref().map(|r| r.grid.clone()).unwrap_or_else(|| vec![DEFAULT_GRID; spec.n]),
    };
    let grid = GridSpec::uniform(&spec.domain, &counts);
    let opts = StaircaseOptions { abs_tol: cfg.quadrature_tol, ..StaircaseOptions::default() };
    let base = &spec.base_point;
    let (out, closed, threshold, potential) = match &cand.data {
        CandidateData::Beta(b) => {
            let out = reconstruct_eta(spec, b, base, &grid, &opts).map_err(potential_error)?;
            let closed = b.eta.as_ref().map(|e| affine_gauge_compare(&out, e, &b.params)).transpose().map_err(potential_error)?;
            (out, closed, 1e-6, "eta")
        }
        CandidateData::Lambda(l) => {
            let out = reconstruct_flux(spec, l, base, &grid, &opts).map_err(potential_error)?;
            let closed = l
                .flux
                .as_ref()
                .map(|f| crate::corpus::flux_mismatch(&out, f, &l.params, base))
                .transpose()
                .map_err(potential_error)?;
            (out, closed, 1e-8, "flux")
        }
    };
    let mut files = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(CliError::input)?;
        let stem = format!("{}_{potential}", case.id);
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        let f = std::fs::File::create(&csv).map_err(CliError::input)?;
        write_csv(&out, std::io::BufWriter::new(f)).map_err(CliError::input)?;
        let f = std::fs::File::create(&json).map_err(CliError::input)?;
        write_json(&out, std::io::BufWriter::new(f)).map_err(CliError::input)?;
        files = vec![csv, json];
    }
    let passed = out.path_residual < 1e-7 && closed.is_none_or(|e| e < threshold);
    let report = ReconstructReport {
        id: case.id.clone(),
        candidate: cand.label.clone(),
        potential: potential.to_string(),
        grid: counts,
        files,
        curl_residual: out.curl_residual,
        path_residual: out.path_residual,
        symmetry_residual: out.symmetry_residual,
        quadrature_panels: out.quadrature.panels,
        quadrature_error: out.quadrature.error_estimate,
        closed_form_error: closed,
        closed_form_threshold: closed.map(|_| threshold),
        passed,
    };
    Ok((report, out))
}

fn reconstruct_text(r: &ReconstructReport) -> String {
    let mut s = format!("{}: {} from {} on grid {:?}\n", r.id, r.potential, r.candidate, r.grid);
    s.push_str(&format!("  curl residual        {:.3e}\n", r.curl_residual));
    s.push_str(&format!("  path independence    {:.3e}\n", r.path_residual));
    s.push_str(&format!("  symmetry residual    {:.3e}\n", r.symmetry_residual));
    s.push_str(&format!("  quadrature           {} panels, error estimate {:.2e}\n", r.quadrature_panels, r.quadrature_error));
    if let (Some(e), Some(t)) = (r.closed_form_error, r.closed_form_threshold) {
        s.push_str(&format!("  closed form          {e:.3e} (limit {t:.1e})\n"));
    }
    for f in &r.files {
        s.push_str(&format!("  wrote {}\n", f.display()));
    }
    s.push_str(if r.passed { "PASS" } else { "FAIL" });
    s
}

/// All bundled examples: the corpus directory and its `extended` subdirectory.
pub fn bundled_cases() -> Result<Vec<ExampleCase>, CorpusError> {
    let dir = corpus_dir();
    let mut cases = load_dir(&dir)?;
    cases.extend(load_dir(&dir.join("extended"))?);
    Ok(cases)
}

pub fn selftest(cfg: &RunConfig, with_suites: bool) -> Result<SelftestReport, CliError> {
    let start = std::time::Instant::now();
    let cases = bundled_cases().map_err(corpus_error)?;
    if cases.is_empty() {
        return Err(CliError::input(format!("no examples found in {}", corpus_dir().display())));
    }
    let verdicts: Vec<Verdict> = cases.iter().map(|c| run_example(c, cfg)).collect();
    let suites = if with_suites { suites::default_suites(&cases) } else { Vec::new() };
    let all = verdicts.iter().flat_map(|v| &v.checks).chain(&suites);
    let (mut passed, mut failed, mut limited) = (0, 0, 0);
    for c in all {
        match c.status {
            CheckStatus::Pass => passed += 1,
            CheckStatus::PrecisionLimited => limited += 1,
            CheckStatus::Fail | CheckStatus::Error => failed += 1,
            CheckStatus::Skipped => {}
        }
    }
    Ok(SelftestReport { verdicts, suites, passed, failed, precision_limited: limited, seconds: start.elapsed().as_secs_f64() })
}

fn selftest_text(r: &SelftestReport) -> String {
    let mut s = String::new();
    for v in &r.verdicts {
        let word = if v.passed() { "PASS" } else { "FAIL" };
        s.push_str(&format!("{word} {} ({} checks, {:.2} s)\n", v.id, v.checks.len(), v.seconds));
        for c in v.checks.iter().filter(|c| !matches!(c.status, CheckStatus::Pass | CheckStatus::Skipped)) {
            s.push_str(&check_line(c));
            s.push('\n');
        }
    }
    if !r.suites.is_empty() {
        s.push_str("property suites:\n");
        for c in &r.suites {
            s.push_str(&check_line(c));
            s.push('\n');
        }
    }
    s.push_str(&format!(
        "{} passed, {} failed, {} limited by floating-point precision, {:.1} s",
        r.passed, r.failed, r.precision_limited, r.seconds
    ));
    s
}

fn list_text(entries: &[CatalogEntry]) -> String {
    entries
        .iter()
        .map(|e| {
            format!(
                "{:<10} n={} {:<8} beta {:<18} lambda {:<6} {} candidates{}",
                e.id,
                e.n,
                if e.rich { "rich" } else { "non-rich" },
                e.beta_case.label(),
                e.lambda_case.label(),
                e.candidates,
                if e.case_tag.is_empty() { String::new() } else { format!("  ({})", e.case_tag) }
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Run a parsed command, writing reports to `out`; returns the exit code.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = cli.opts.config();
    cfg.validate().map_err(CliError::input)?;
    let output = cli.opts.output;
    match &cli.command {
        Command::Analyze { file } => {
            let case = load_example(file).map_err(corpus_error)?;
            let r = analyze(&case, &cfg)?;
            emit(out, output, &r, || analyze_text(&r))?;
            Ok(EXIT_PASS)
        }
        Command::Verify { file, candidates } => {
            let case = load_example(file).map_err(corpus_error)?;
            let cands = match candidates {
                Some(p) => load_candidates(p, &case.spec).map_err(corpus_error)?,
                None => case.candidates.clone(),
            };
            let r = verify(&case, &cands, &cfg)?;
            emit(out, output, &r, || {
                let mut s = format!("{}: {} candidates at {} samples\n", r.id, cands.len(), r.samples);
                for c in &r.checks {
                    s.push_str(&check_line(c));
                    s.push('\n');
                }
                s.push_str(if r.passed { "PASS" } else { "FAIL" });
                s
            })?;
            Ok(checks_code(&r.checks))
        }
        Command::Reconstruct { file, candidates, flux, index, out_dir } => {
            let case = load_example(file).map_err(corpus_error)?;
            let cands = match candidates {
                Some(p) => load_candidates(p, &case.spec).map_err(corpus_error)?,
                None => case.candidates.clone(),
            };
            let (r, _) = reconstruct(&case, &cands, *flux, *index, Some(out_dir), &cfg)?;
            emit(out, output, &r, || reconstruct_text(&r))?;
            Ok(if r.passed { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::Selftest { no_suites } => {
            let r = selftest(&cfg, !no_suites)?;
            emit(out, output, &r, || selftest_text(&r))?;
            Ok(if r.failed + r.precision_limited == 0 { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::List => {
            let entries = list_examples(&corpus_dir()).map_err(corpus_error)?;
            emit(out, output, &entries, || list_text(&entries))?;
            Ok(EXIT_PASS)
        }
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("eigenframe").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn grid_flag_splits_on_commas() {
        let cli = parse(&["reconstruct", "x.json", "--grid", "3,4,5"]);
        assert_eq!(cli.opts.grid, Some(vec![3, 4, 5]));
    }

    #[test]
    fn sample_floor_is_an_input_error() {
        let cli = parse(&["--samples", "4", "list"]);
        let err = run(&cli, &mut Vec::new()).unwrap_err();
        assert_eq!(err.code, EXIT_INPUT);
        let cli = parse(&["--samples", "8", "list"]);
        assert_eq!(run(&cli, &mut Vec::new()).unwrap(), EXIT_PASS);
    }

    #[test]
    fn missing_file_is_input_error() {
        let cli = parse(&["analyze", "/nonexistent.json"]);
        assert_eq!(run(&cli, &mut Vec::new()).unwrap_err().code, EXIT_INPUT);
    }
}
