use super::*;
use crate::classify::{BetaCase, LambdaCase};
use std::collections::BTreeSet;
use std::path::Path;

fn minimal(frame: &str) -> String {
    format!(
        r#"{{"id":"t","n":2,"vars":["u1","u2"],"frame":{frame},
           "domain":{{"lo":[1,1],"hi":[2,2]}},"base":[1.5,1.5],
           "expected":{{"rich":true,"rank_beta":0,"rank_lambda":0,"lambda_case":"not_n3","beta_case":"unconstrained"}}}}"#
    )
}

#[test]
fn undeclared_variable_is_located() {
    let err = parse_example(&minimal(r#"[["1","0"],["0","u3"]]"#), Path::new("t.json")).unwrap_err();
    match err {
        CorpusError::Parse { location, .. } => assert_eq!(location, "frame[1][1]"),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn unknown_field_is_schema_error() {
    let text = minimal(r#"[["1","0"],["0","1"]]"#).replacen("\"id\"", "\"bogus\":1,\"id\"", 1);
    assert!(matches!(parse_example(&text, Path::new("t.json")), Err(CorpusError::Schema { .. })));
}

#[test]
fn minimal_example_loads() {
    let case = parse_example(&minimal(r#"[["1","0"],["0","1"]]"#), Path::new("t.json")).unwrap();
    assert_eq!(case.spec.n, 2);
    assert!(case.candidates.is_empty());
}

#[test]
fn missing_dir_is_empty() {
    assert!(list_examples(Path::new("/nonexistent/corpus/dir")).unwrap().is_empty());
}

#[test]
fn catalog_ids_and_dimension() {
    let cat = list_examples(&corpus_dir()).unwrap();
    let ids: Vec<&str> = cat.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(
        ids,
        ["ex6.1a", "ex6.1b", "ex6.2", "ex6.3", "ex6.4", "ex6.5", "ex6.6", "ex6.7", "ex6.8", "ex6.9", "ex6.10", "ex6.11", "ex6.12"]
    );
    let e12 = cat.iter().find(|c| c.id == "ex6.12").unwrap();
    assert_eq!(e12.n, 4);
}

#[test]
fn corpus_covers_every_label() {
    let mut cases = load_dir(&corpus_dir()).unwrap();
    cases.extend(load_dir(&corpus_dir().join("extended")).unwrap());
    let betas: BTreeSet<BetaCase> = cases.iter().map(|c| c.expected.as_ref().unwrap().beta_case).collect();
    let lambdas: BTreeSet<LambdaCase> = cases.iter().map(|c| c.expected.as_ref().unwrap().lambda_case).collect();
    for l in [LambdaCase::I, LambdaCase::IIa, LambdaCase::IIb, LambdaCase::III] {
        assert!(lambdas.contains(&l), "{l:?} not covered");
    }
    for b in [BetaCase::Nr1, BetaCase::Nr2, BetaCase::Nr3a, BetaCase::Nr3b, BetaCase::Nr4a, BetaCase::Nr4b, BetaCase::Nr4c, BetaCase::Rich3, BetaCase::Unconstrained] {
        assert!(betas.contains(&b), "{b:?} not covered");
    }
}

#[test]
fn verdict_round_trips() {
    let case = load_example(&corpus_dir().join("ex6.3.json")).unwrap();
    let cfg = RunConfig { samples: 8, reconstruct: false, darboux: false, ..RunConfig::default() };
    let v = run_example(&case, &cfg);
    let back: Verdict = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(back, v);
}

#[test]
fn config_validation() {
    assert!(RunConfig::default().validate().is_ok());
    assert!(RunConfig { samples: 4, ..RunConfig::default() }.validate().is_err());
    assert!(RunConfig { tol: 0.0, ..RunConfig::default() }.validate().is_err());
}

#[test]
fn tiny_tolerance_is_precision_limited_not_failed() {
    let case = load_example(&corpus_dir().join("ex6.3.json")).unwrap();
    let cfg = RunConfig { samples: 8, tol: 1e-15, reconstruct: false, darboux: false, ..RunConfig::default() };
    let v = run_example(&case, &cfg);
    assert!(v.checks.iter().all(|c| c.status != CheckStatus::Fail), "{:#?}", v.checks);
}

#[test]
fn every_example_passes() {
    let mut cases = load_dir(&corpus_dir()).unwrap();
    cases.extend(load_dir(&corpus_dir().join("extended")).unwrap());
    let cfg = RunConfig::default();
    let mut bad = Vec::new();
    for case in &cases {
        let v = run_example(case, &cfg);
        for c in v.checks.iter().filter(|c| !matches!(c.status, CheckStatus::Pass | CheckStatus::Skipped)) {
            bad.push(format!("{}: {} {:?} {:?} {}", v.id, c.name, c.value, c.threshold, c.detail));
        }
    }
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}
