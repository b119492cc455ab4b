//! Library-level runs across modules: corpus file to classification,
//! verification and exported potentials.

use eigenframe::classify::classify;
use eigenframe::corpus::{corpus_dir, load_example, parse_candidates, run_example, CandidateData, CheckStatus, RunConfig};
use eigenframe::geometry::{connection_at, random_frame};
use eigenframe::potential::{entropy_flux, reconstruct_eta, write_csv, GridSpec, StaircaseOptions};
use eigenframe::systems::{beta_algebraic, beta_residual, check_rank_duality_n3, generic_rank, lambda_algebraic};
use proptest::prelude::*;

#[test]
fn euler_entropy_pair_end_to_end() {
    let case = load_example(&corpus_dir().join("ex6.1b.json")).unwrap();
    let report = classify(&case.spec, &case.spec.samples(30, 0), 1e-8).unwrap();
    assert_eq!(report.beta_case.label(), "nr-4a");
    let CandidateData::Beta(b) = &case.candidates[0].data else { panic!() };
    let CandidateData::Lambda(l) = &case.candidates[2].data else { panic!() };
    let grid = GridSpec::uniform(&case.spec.domain, &[4, 4, 4]);
    let opts = StaircaseOptions::default();
    let eta = reconstruct_eta(&case.spec, b, &case.spec.base_point, &grid, &opts).unwrap();
    let q = entropy_flux(&case.spec, l, b, &case.spec.base_point, &grid, &opts).unwrap();
    assert!(eta.path_residual < 1e-7 && q.path_residual < 1e-7);
    let mut buf = Vec::new();
    write_csv(&eta, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 65);
}

#[test]
fn external_candidates_compile_against_frame() {
    let case = load_example(&corpus_dir().join("ex6.11.json")).unwrap();
    let text = r#"[{"kind":"beta","exprs":["-K*u2","K*u2","K"],"params":{"K":3}},
                  {"kind":"beta","exprs":["-u2","u2","1"]}]"#;
    let cands = parse_candidates(text, "inline.json".as_ref(), &case.spec).unwrap();
    for c in &cands {
        let CandidateData::Beta(b) = &c.data else { panic!() };
        for p in case.spec.samples(10, 0) {
            assert!(beta_residual(&case.spec, b, &p).unwrap().max_abs < 1e-12);
        }
    }
    let bad = r#"{"kind":"beta","exprs":["K*u4","0","0"]}"#;
    assert!(parse_candidates(bad, "inline.json".as_ref(), &case.spec).is_err());
}

#[test]
fn run_is_deterministic_across_seeds() {
    let case = load_example(&corpus_dir().join("ex6.9.json")).unwrap();
    for seed in [0, 17] {
        let cfg = RunConfig { seed, samples: 16, darboux: false, ..RunConfig::default() };
        let a = run_example(&case, &cfg);
        let b = run_example(&case, &cfg);
        assert_eq!(a.checks, b.checks);
        assert!(a.checks.iter().all(|c| c.status == CheckStatus::Pass || c.status == CheckStatus::Skipped));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, .. ProptestConfig::default() })]

    #[test]
    fn random_frames_satisfy_rank_duality(seed in 0u64..10_000) {
        let spec = random_frame(seed, 3);
        let p = &spec.samples(1, seed as usize)[0];
        let c = connection_at(&spec, p).unwrap();
        prop_assert!(check_rank_duality_n3(&c) < 1e-12);
        prop_assert_eq!(generic_rank(&[beta_algebraic(&c)], 1e-8), generic_rank(&[lambda_algebraic(&c)], 1e-8));
    }
}
