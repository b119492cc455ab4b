//! Case taxonomy for three-dimensional frames.
//!
//! The λ-system is classified by the rank of its algebraic rows and the
//! number of active columns.  For the β-system of rank 1 the rich branch
//! is decided directly from the Christoffel symbols; the non-rich branch
//! eliminates `β¹` and runs the reduction in [`engine`].

mod engine;

use crate::exprlang::Scalar;
use crate::geometry::{connection_at, is_rich, ConnectionEval, FrameSeries, FrameSpec, GeometryError};
use crate::systems::{beta_algebraic, generic_rank, lambda_algebraic, AlgebraicSystem, SystemsError};
use engine::{Ctx, Field, Outcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Frame series order used by the reduction.
const SERIES_ORDER: usize = 7;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Systems(#[from] SystemsError),
    #[error("no index permutation gives a nonvanishing c_32^1")]
    NormalizationFailed,
    #[error("vanishing test inconclusive for {condition}: {value:e}")]
    InconclusiveVanishing { condition: String, value: f64 },
    #[error("β-rank {beta} and λ-rank {lambda} disagree")]
    RankMismatch { beta: usize, lambda: usize },
    #[error("unexpected branch: {0}")]
    UnexpectedBranch(String),
    #[error("frame has dimension {0}; the case taxonomy needs 3")]
    Dimension(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub condition: String,
    /// Scaled magnitude, or `null` for structural notes.
    pub value: Option<f64>,
    pub verdict: String,
}

impl TraceEntry {
    pub fn new(condition: &str, value: f64, verdict: &str) -> Self {
        TraceEntry {
            condition: condition.to_string(),
            value: value.is_finite().then_some(value),
            verdict: verdict.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LambdaCase {
    I,
    IIa,
    IIb,
    III,
    #[serde(rename = "not_n3")]
    NotN3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaCase {
    #[serde(rename = "rich-1")]
    Rich1,
    #[serde(rename = "rich-2")]
    Rich2,
    #[serde(rename = "rich-3")]
    Rich3,
    #[serde(rename = "nr-1")]
    Nr1,
    #[serde(rename = "nr-2")]
    Nr2,
    #[serde(rename = "nr-3a")]
    Nr3a,
    #[serde(rename = "nr-3b")]
    Nr3b,
    #[serde(rename = "nr-4a")]
    Nr4a,
    #[serde(rename = "nr-4b")]
    Nr4b,
    #[serde(rename = "nr-4c")]
    Nr4c,
    Unconstrained,
    #[serde(rename = "rank2-unclassified")]
    Rank2Unclassified,
    /// Constrained frame outside dimension three.
    Unclassified,
}

impl BetaCase {
    pub fn label(self) -> &'static str {
        match self {
            BetaCase::Rich1 => "rich-1",
            BetaCase::Rich2 => "rich-2",
            BetaCase::Rich3 => "rich-3",
            BetaCase::Nr1 => "nr-1",
            BetaCase::Nr2 => "nr-2",
            BetaCase::Nr3a => "nr-3a",
            BetaCase::Nr3b => "nr-3b",
            BetaCase::Nr4a => "nr-4a",
            BetaCase::Nr4b => "nr-4b",
            BetaCase::Nr4c => "nr-4c",
            BetaCase::Unconstrained => "unconstrained",
            BetaCase::Rank2Unclassified => "rank2-unclassified",
            BetaCase::Unclassified => "unclassified",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        ALL_CASES.iter().copied().find(|c| c.label() == s)
    }

    /// Size of the solution set in words.
    pub fn freedom(self, n: usize) -> String {
        match self {
            BetaCase::Unconstrained => format!("{n} functions of one variable"),
            BetaCase::Rich1 | BetaCase::Nr1 => "trivial solution only".into(),
            BetaCase::Rich2 | BetaCase::Nr2 => "1 function of one variable".into(),
            BetaCase::Rich3 | BetaCase::Nr3a => "2 functions of one variable".into(),
            BetaCase::Nr3b | BetaCase::Nr4c => "1 constant".into(),
            BetaCase::Nr4a => "1 function of one variable and 1 constant".into(),
            BetaCase::Nr4b => "2 constants".into(),
            BetaCase::Rank2Unclassified => "not classified (algebraic rank 2)".into(),
            BetaCase::Unclassified => "not classified (dimension other than 3)".into(),
        }
    }

    pub fn is_rich_case(self) -> bool {
        matches!(self, BetaCase::Rich1 | BetaCase::Rich2 | BetaCase::Rich3)
    }

    pub fn is_nonrich_case(self) -> bool {
        self.label().starts_with("nr-")
    }
}

const ALL_CASES: [BetaCase; 13] = [
    BetaCase::Rich1,
    BetaCase::Rich2,
    BetaCase::Rich3,
    BetaCase::Nr1,
    BetaCase::Nr2,
    BetaCase::Nr3a,
    BetaCase::Nr3b,
    BetaCase::Nr4a,
    BetaCase::Nr4b,
    BetaCase::Nr4c,
    BetaCase::Unconstrained,
    BetaCase::Rank2Unclassified,
    BetaCase::Unclassified,
];

impl LambdaCase {
    pub fn label(self) -> &'static str {
        match self {
            LambdaCase::I => "I",
            LambdaCase::IIa => "IIa",
            LambdaCase::IIb => "IIb",
            LambdaCase::III => "III",
            LambdaCase::NotN3 => "not_n3",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        [LambdaCase::I, LambdaCase::IIa, LambdaCase::IIb, LambdaCase::III, LambdaCase::NotN3]
            .into_iter()
            .find(|c| c.label() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub n: usize,
    pub richness: bool,
    pub rank_beta: usize,
    pub rank_lambda: usize,
    pub lambda_case: LambdaCase,
    pub beta_case: BetaCase,
    pub freedom: String,
    pub trace: Vec<TraceEntry>,
    /// `permutation[a]` is the original index of the field in slot `a`.
    pub permutation: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct LambdaVerdict {
    pub case: LambdaCase,
    pub rank: usize,
    pub trace: Vec<TraceEntry>,
}

#[derive(Clone, Debug)]
pub struct BetaVerdict {
    pub case: BetaCase,
    pub permutation: Vec<usize>,
    pub trace: Vec<TraceEntry>,
}

fn connections(spec: &FrameSpec, samples: &[Vec<f64>]) -> Result<Vec<ConnectionEval>, GeometryError> {
    samples.par_iter().map(|p| connection_at(spec, p)).collect()
}

fn series(spec: &FrameSpec, samples: &[Vec<f64>]) -> Result<Vec<FrameSeries>, GeometryError> {
    samples.par_iter().map(|p| spec.series(p, SERIES_ORDER)).collect()
}

/// The same frame with fields reordered: slot `a` holds `R_{perm[a]}`.
pub fn permute_frame(spec: &FrameSpec, perm: &[usize]) -> FrameSpec {
    let mut out = spec.clone();
    out.frame = perm.iter().map(|&i| spec.frame[i].clone()).collect();
    out.chart = None;
    out
}

fn scaled_magnitude(conns: &[ConnectionEval], f: impl Fn(&ConnectionEval) -> f64) -> f64 {
    conns.iter().map(|c| f(c).abs() / c.gamma_scale().max(1.0)).fold(0.0, f64::max)
}

fn judge(m: f64, tol: f64, name: &str) -> Result<bool, ClassifyError> {
    if m < tol {
        Ok(false)
    } else if m > 10.0 * tol {
        Ok(true)
    } else {
        Err(ClassifyError::InconclusiveVanishing { condition: name.to_string(), value: m })
    }
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// First permutation (in lexicographic order) with `c_32^1 ≢ 0` and
/// `Γ_32^1 ≢ 0`, falling back to `c_32^1 ≢ 0` alone.
pub fn normalize_indices(conns: &[ConnectionEval], tol: f64) -> Result<Vec<usize>, ClassifyError> {
    if conns.first().is_some_and(|c| c.n != 3) {
        return Err(ClassifyError::Dimension(conns[0].n));
    }
    let big = |m: f64| m > 10.0 * tol;
    let c_mag = |s: &[usize; 3]| scaled_magnitude(conns, |c| c.c(s[2], s[1], s[0]));
    let g_mag = |s: &[usize; 3]| scaled_magnitude(conns, |c| c.gamma(s[2], s[1], s[0]));
    PERMUTATIONS
        .iter()
        .find(|s| big(c_mag(s)) && big(g_mag(s)))
        .or_else(|| PERMUTATIONS.iter().find(|s| big(c_mag(s))))
        .map(|s| s.to_vec())
        .ok_or(ClassifyError::NormalizationFailed)
}

fn lambda_from_systems(systems: &[AlgebraicSystem], tol: f64) -> LambdaVerdict {
    let rank = generic_rank(systems, tol);
    let mut trace = vec![TraceEntry::new("generic rank of the λ rows", f64::NAN, &rank.to_string())];
    let case = match rank {
        0 => LambdaCase::I,
        1 => {
            let n = systems.first().map_or(3, |s| s.n);
            let mut act = vec![0.0_f64; n];
            for s in systems {
                let m = s.matrix();
                let best = (0..m.nrows()).max_by(|&a, &b| m.row(a).norm().total_cmp(&m.row(b).norm()));
                if let Some(r) = best {
                    let nrm = m.row(r).norm();
                    if nrm > 0.0 {
                        for (k, a) in act.iter_mut().enumerate() {
                            *a = a.max(m[(r, k)].abs() / nrm);
                        }
                    }
                }
            }
            let mut count = 0;
            for (k, a) in act.iter().enumerate() {
                let verdict = if *a > 10.0 * tol {
                    count += 1;
                    "active"
                } else if *a < tol {
                    "absent"
                } else {
                    count += 1;
                    "inconclusive, counted as active"
                };
                trace.push(TraceEntry::new(&format!("λ{} in the constraint", k + 1), *a, verdict));
            }
            if count == 3 {
                LambdaCase::IIa
            } else {
                LambdaCase::IIb
            }
        }
        _ => LambdaCase::III,
    };
    LambdaVerdict { case, rank, trace }
}

/// λ-case of a three-dimensional frame.
pub fn classify_lambda_n3(spec: &FrameSpec, samples: &[Vec<f64>], tol: f64) -> Result<LambdaVerdict, ClassifyError> {
    if spec.n != 3 {
        return Err(ClassifyError::Dimension(spec.n));
    }
    let systems: Vec<_> = connections(spec, samples)?.iter().map(lambda_algebraic).collect();
    Ok(lambda_from_systems(&systems, tol))
}

/// Rich frame with β-rank 1.  The distinct-index symbols `Z_ij^k` of a
/// Riemann chart are proportional to `Γ_ij^k`, so the decision uses `Γ`.
pub fn classify_beta_rich_rank1(spec: &FrameSpec, samples: &[Vec<f64>], tol: f64) -> Result<BetaVerdict, ClassifyError> {
    if spec.n != 3 {
        return Err(ClassifyError::Dimension(spec.n));
    }
    let conns = connections(spec, samples)?;
    let (rich, _) = is_rich(spec, samples, tol)?;
    if !rich {
        return Err(GeometryError::NotRich.into());
    }
    let beta = generic_rank(&conns.iter().map(beta_algebraic).collect::<Vec<_>>(), tol);
    let lambda = generic_rank(&conns.iter().map(lambda_algebraic).collect::<Vec<_>>(), tol);
    if beta != 1 || lambda != 1 {
        return Err(ClassifyError::RankMismatch { beta, lambda });
    }
    let mut trace = Vec::new();
    // the upper index of the one nonvanishing Γ_ij^k with distinct indices
    let mut upper = Vec::new();
    for k in 0..3 {
        let (i, j) = match k {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let m = scaled_magnitude(&conns, |c| c.gamma(i, j, k));
        let name = format!("Γ_{}{}^{}", i + 1, j + 1, k + 1);
        let nz = judge(m, tol, &name)?;
        trace.push(TraceEntry::new(&name, m, if nz { "nonzero" } else { "vanishes" }));
        if nz {
            upper.push(k);
        }
    }
    let [k] = upper[..] else {
        return Err(ClassifyError::UnexpectedBranch(format!(
            "{} nonvanishing distinct-index symbols in a rank-1 rich frame",
            upper.len()
        )));
    };
    let mut perm = vec![k];
    perm.extend((0..3).filter(|&x| x != k));
    let conns = if perm == [0, 1, 2] { conns } else { connections(&permute_frame(spec, &perm), samples)? };
    let mut test = |i: usize, j: usize, k: usize| -> Result<bool, ClassifyError> {
        let m = scaled_magnitude(&conns, |c| c.gamma(i, j, k));
        let name = format!("Γ_{}{}^{} after relabeling", i + 1, j + 1, k + 1);
        let nz = judge(m, tol, &name)?;
        trace.push(TraceEntry::new(&name, m, if nz { "nonzero" } else { "vanishes" }));
        Ok(nz)
    };
    let g112 = test(0, 0, 1)?;
    let g113 = test(0, 0, 2)?;
    let case = rich_case(g112, g113, &mut test)?;
    Ok(BetaVerdict { case, permutation: perm, trace })
}

/// Decision tree of the rich rank-1 branch.  `test(i, j, k)` reports
/// whether `Γ_ij^k ≢ 0` and is only called when the branch needs it.
fn rich_case(
    g112: bool,
    g113: bool,
    test: &mut dyn FnMut(usize, usize, usize) -> Result<bool, ClassifyError>,
) -> Result<BetaCase, ClassifyError> {
    Ok(match (g112, g113) {
        (true, true) => BetaCase::Rich1,
        (true, false) if test(1, 1, 2)? => BetaCase::Rich1,
        (false, true) if test(2, 2, 1)? => BetaCase::Rich1,
        (true, false) | (false, true) => BetaCase::Rich2,
        (false, false) => BetaCase::Rich3,
    })
}

/// Non-rich frame with β-rank 1.
pub fn classify_beta_nonrich_rank1(spec: &FrameSpec, samples: &[Vec<f64>], tol: f64) -> Result<BetaVerdict, ClassifyError> {
    if spec.n != 3 {
        return Err(ClassifyError::Dimension(spec.n));
    }
    let conns = connections(spec, samples)?;
    let perm = normalize_indices(&conns, tol)?;
    let work = permute_frame(spec, &perm);
    let fss = series(&work, samples)?;
    let mut ctx = Ctx::new(&fss, tol);
    ctx.note(format!("fields relabeled as {:?}", perm.iter().map(|i| i + 1).collect::<Vec<_>>()), "normalized");
    let c321 = ctx.c(2, 1, 0);
    let a2 = Field(ctx.gamma(2, 0, 1).0.iter().zip(&c321.0).map(|(g, c)| g.neg().div(c)).collect());
    let a3 = Field(ctx.gamma(1, 0, 2).0.iter().zip(&c321.0).map(|(g, c)| g.div(c)).collect());
    let a2 = Some(a2);
    let a3 = Some(a3);
    let nz2 = ctx.nonzero(&a2, 0, "α² = -Γ_31^2 / c_32^1", true)?;
    let nz3 = ctx.nonzero(&a3, 0, "α³ = Γ_21^3 / c_32^1", true)?;
    let alpha = [if nz2 { a2 } else { None }, if nz3 { a3 } else { None }];
    let stage = engine::initial_stage(&mut ctx, alpha)?;
    let outcome = engine::solve(&mut ctx, stage)?;
    let case = match outcome {
        Outcome::Trivial => BetaCase::Nr1,
        Outcome::Free { functions, constants, nonzero } => match (functions, constants, nonzero) {
            (1, 0, 1) => BetaCase::Nr2,
            (2, 0, 2) => BetaCase::Nr3a,
            (0, 1, 2) => BetaCase::Nr3b,
            (1, 1, 3) => BetaCase::Nr4a,
            (0, 2, 3) => BetaCase::Nr4b,
            (0, 1, 3) => BetaCase::Nr4c,
            other => {
                return Err(ClassifyError::UnexpectedBranch(format!(
                    "{} functions, {} constants, {} nonzero components",
                    other.0, other.1, other.2
                )))
            }
        },
    };
    let mut trace = ctx.trace;
    trace.push(TraceEntry::new("non-rich reduction", f64::NAN, case.label()));
    Ok(BetaVerdict { case, permutation: perm, trace })
}

/// Full report.  Frames of dimension other than 3 get ranks and richness only.
pub fn classify(spec: &FrameSpec, samples: &[Vec<f64>], tol: f64) -> Result<ClassificationReport, ClassifyError> {
    let n = spec.n;
    let conns = connections(spec, samples)?;
    let beta_sys: Vec<_> = conns.iter().map(beta_algebraic).collect();
    let lambda_sys: Vec<_> = conns.iter().map(lambda_algebraic).collect();
    let rank_beta = generic_rank(&beta_sys, tol);
    let rank_lambda = generic_rank(&lambda_sys, tol);
    let (richness, witness) = is_rich(spec, samples, tol)?;
    let mut trace = vec![
        TraceEntry::new("richness (max scaled c_ij^k, distinct indices)", witness.map_or(0.0, |w| w.value), &richness.to_string()),
        TraceEntry::new("generic rank of the β rows", f64::NAN, &rank_beta.to_string()),
    ];
    let identity: Vec<usize> = (0..n).collect();
    if n != 3 {
        let beta_case = if rank_beta == 0 { BetaCase::Unconstrained } else { BetaCase::Unclassified };
        trace.push(TraceEntry::new("generic rank of the λ rows", f64::NAN, &rank_lambda.to_string()));
        return Ok(ClassificationReport {
            n,
            richness,
            rank_beta,
            rank_lambda,
            lambda_case: LambdaCase::NotN3,
            beta_case,
            freedom: beta_case.freedom(n),
            trace,
            permutation: identity,
        });
    }
    let lv = lambda_from_systems(&lambda_sys, tol);
    trace.extend(lv.trace);
    if rank_beta != rank_lambda {
        trace.push(TraceEntry::new("β and λ ranks agree", f64::NAN, "no"));
        return Err(ClassifyError::RankMismatch { beta: rank_beta, lambda: rank_lambda });
    }
    let (beta_case, permutation) = match rank_beta {
        0 => (BetaCase::Unconstrained, identity),
        1 => {
            let bv = if richness {
                classify_beta_rich_rank1(spec, samples, tol)?
            } else {
                classify_beta_nonrich_rank1(spec, samples, tol)?
            };
            trace.extend(bv.trace);
            (bv.case, bv.permutation)
        }
        _ => (BetaCase::Rank2Unclassified, identity),
    };
    Ok(ClassificationReport {
        n,
        richness,
        rank_beta,
        rank_lambda,
        lambda_case: lv.case,
        beta_case,
        freedom: beta_case.freedom(n),
        trace,
        permutation,
    })
}
