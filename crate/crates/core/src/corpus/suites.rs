//! Property suites over random frames and random rescalings of corpus
//! frames.  Each returns one [`CheckResult`].

use super::{CandidateData, CheckResult, CheckStatus, ExampleCase};
use crate::exprlang::{parse_expression, Expr, Params};
use crate::geometry::{check_symmetry_flatness, connection_at, random_frame, FrameSpec};
use crate::systems::{
    beta_algebraic, beta_residual, check_rank_duality_n3, generic_rank, lambda_algebraic, lambda_residual, BetaCandidate,
    LambdaCandidate,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RANK_TOL: f64 = 1e-8;

fn result(name: String, worst: f64, threshold: f64, failures: usize, detail: String) -> CheckResult {
    let status = if failures == 0 && worst < threshold { CheckStatus::Pass } else { CheckStatus::Fail };
    CheckResult { name, status, value: Some(worst), threshold: Some(threshold), detail }
}

fn failed(name: String, e: impl std::fmt::Display) -> CheckResult {
    CheckResult { name, status: CheckStatus::Fail, value: None, threshold: None, detail: e.to_string() }
}

/// Equal ranks of the two algebraic systems and the entrywise duality
/// identity on `count` random `n = 3` frames.
pub fn rank_duality(count: u64, samples: usize) -> CheckResult {
    let name = format!("rank duality on {count} random frames");
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    for seed in 0..count {
        let spec = random_frame(seed, 3);
        for p in spec.samples(samples, seed as usize) {
            let c = match connection_at(&spec, &p) {
                Ok(c) => c,
                Err(e) => return failed(name, e),
            };
            worst = worst.max(check_rank_duality_n3(&c));
            if generic_rank(&[beta_algebraic(&c)], RANK_TOL) != generic_rank(&[lambda_algebraic(&c)], RANK_TOL) {
                mismatches += 1;
            }
        }
    }
    result(name, worst, 1e-12, mismatches, format!("{mismatches} rank mismatches"))
}

/// Symmetry and flatness of the connection on random frames; the value
/// is the larger of the two residuals.
pub fn random_identities(count: u64, samples: usize) -> CheckResult {
    let name = format!("connection identities on {count} random frames");
    let mut torsion: f64 = 0.0;
    let mut curvature: f64 = 0.0;
    for seed in 0..count {
        let spec = random_frame(seed + 1000, 3);
        for p in spec.samples(samples, seed as usize) {
            match check_symmetry_flatness(&spec, &p) {
                Ok(r) => {
                    torsion = torsion.max(r.torsion);
                    curvature = curvature.max(r.curvature);
                }
                Err(e) => return failed(name, e),
            }
        }
    }
    let fail = usize::from(torsion >= 1e-10);
    result(name, curvature.max(torsion), 1e-8, fail, format!("symmetry {torsion:.2e}, flatness {curvature:.2e}"))
}

/// `exp(a·u + b)` with small random coefficients; never vanishes.
fn random_alpha(vars: &[String], rng: &mut ChaCha8Rng) -> Vec<Expr> {
    (0..vars.len())
        .map(|_| {
            let mut s = format!("exp({:.4}", rng.gen_range(-0.5..0.5));
            for v in vars {
                s.push_str(&format!(" + ({:.4})*{v}", rng.gen_range(-0.4..0.4)));
            }
            s.push(')');
            parse_expression(&s, vars, &[]).expect("generated scaling parses")
        })
        .collect()
}

/// Rescaling `R_j → α^j R_j` maps a solution `β` to `(α^j)² β^j`.
/// Triples cycle through the verified `β` candidates of `cases`.
pub fn scaling_covariance(cases: &[ExampleCase], count: usize, samples: usize) -> CheckResult {
    let name = format!("scaling covariance on {count} triples");
    let pairs: Vec<(&FrameSpec, &BetaCandidate)> = cases
        .iter()
        .flat_map(|c| {
            c.candidates.iter().filter_map(move |k| match &k.data {
                CandidateData::Beta(b) => Some((&c.spec, b)),
                _ => None,
            })
        })
        .collect();
    if pairs.is_empty() {
        return failed(name, "no β candidates available");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for t in 0..count {
        let (spec, beta) = pairs[t % pairs.len()];
        let alpha = random_alpha(&spec.vars, &mut rng);
        let scaled = match spec.scale_frame(&alpha) {
            Ok(s) => s,
            Err(e) => return failed(name, e),
        };
        let sb = BetaCandidate { eta: None, ..beta.scaled(&alpha) };
        for p in spec.samples(samples, t) {
            match beta_residual(&scaled, &sb, &p) {
                Ok(r) => worst = worst.max(r.max_abs),
                Err(e) => return failed(name, e),
            }
        }
    }
    result(name, worst, 1e-8, 0, format!("{} distinct (frame, β) pairs", pairs.len().min(count)))
}

fn poly(vars: &[String], rng: &mut ChaCha8Rng) -> String {
    let mut s = format!("{:.4}", rng.gen_range(-1.0..1.0));
    for v in vars {
        s.push_str(&format!(" + ({:.4})*{v}", rng.gen_range(-1.0..1.0)));
    }
    for v in vars {
        s.push_str(&format!(" + ({:.4})*{v}^2", rng.gen_range(-0.5..0.5)));
    }
    s
}

/// A frame whose vectors are the columns of a rotation `Rz(a) Ry(b) Rx(c)`
/// with random quadratic angles.
pub fn random_orthonormal_frame(seed: u64) -> FrameSpec {
    let vars: Vec<String> = ["u1", "u2", "u3"].iter().map(|s| s.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c) = (poly(&vars, &mut rng), poly(&vars, &mut rng), poly(&vars, &mut rng));
    let (ca, sa) = (format!("cos({a})"), format!("sin({a})"));
    let (cb, sb) = (format!("cos({b})"), format!("sin({b})"));
    let (cc, sc) = (format!("cos({c})"), format!("sin({c})"));
    let m = [
        [format!("{ca}*{cb}"), format!("{ca}*{sb}*{sc} - {sa}*{cc}"), format!("{ca}*{sb}*{cc} + {sa}*{sc}")],
        [format!("{sa}*{cb}"), format!("{sa}*{sb}*{sc} + {ca}*{cc}"), format!("{sa}*{sb}*{cc} - {ca}*{sc}")],
        [format!("-{sb}"), format!("{cb}*{sc}"), format!("{cb}*{cc}")],
    ];
    let cols: Vec<Vec<&str>> = (0..3).map(|j| (0..3).map(|r| m[r][j].as_str()).collect()).collect();
    let v: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    FrameSpec::parse(&v, Params::new(), &cols, vec![[-0.5, 0.5]; 3], vec![0.0; 3]).expect("rotation frame parses")
}

/// On orthonormal frames the two systems are the same equations: the
/// residual vectors of `β = λ = g` agree entry by entry.
pub fn orthonormal_coincidence(count: u64, samples: usize) -> CheckResult {
    let name = format!("orthonormal coincidence on {count} random frames");
    let mut worst: f64 = 0.0;
    let mut mismatched = 0;
    for seed in 0..count {
        let spec = random_orthonormal_frame(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 500);
        let src: Vec<String> = (0..3).map(|_| format!("sin({})", poly(&spec.vars, &mut rng))).collect();
        let b = BetaCandidate::parse(&spec.vars, Params::new(), &src, None).expect("candidate parses");
        let l = LambdaCandidate::parse(&spec.vars, Params::new(), &src, None).expect("candidate parses");
        for p in spec.samples(samples, seed as usize) {
            let (rb, rl) = match (beta_residual(&spec, &b, &p), lambda_residual(&spec, &l, &p)) {
                (Ok(x), Ok(y)) => (x, y),
                (Err(e), _) | (_, Err(e)) => return failed(name, e),
            };
            if rb.pde.len() != rl.pde.len() || rb.algebraic.len() != rl.algebraic.len() {
                mismatched += 1;
                continue;
            }
            for (x, y) in rb.pde.iter().zip(&rl.pde).chain(rb.algebraic.iter().zip(&rl.algebraic)) {
                if x.indices != y.indices {
                    mismatched += 1;
                }
                worst = worst.max((x.raw - y.raw).abs());
            }
        }
    }
    result(name, worst, 1e-12, mismatched, format!("{mismatched} layout mismatches"))
}

/// The suites at the sizes used by the self-test.
pub fn default_suites(cases: &[ExampleCase]) -> Vec<CheckResult> {
    vec![
        rank_duality(100, 3),
        random_identities(100, 3),
        scaling_covariance(cases, 20, 10),
        orthonormal_coincidence(20, 10),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_frame_is_orthonormal() {
        let spec = random_orthonormal_frame(3);
        for p in spec.samples(10, 0) {
            let r = spec.eval_matrix(&p).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|m| r[m][i] * r[m][j]).sum();
                    assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn small_suites_pass() {
        assert_eq!(rank_duality(5, 2).status, CheckStatus::Pass);
        assert_eq!(random_identities(5, 2).status, CheckStatus::Pass);
        assert_eq!(orthonormal_coincidence(3, 4).status, CheckStatus::Pass);
    }

    #[test]
    fn scaling_needs_candidates() {
        assert_eq!(scaling_covariance(&[], 3, 3).status, CheckStatus::Fail);
    }
}
