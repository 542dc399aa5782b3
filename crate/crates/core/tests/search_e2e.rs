//! End-to-end search behavior on the triangular-numbers program with the
//! exhaustive bounded oracle.

use std::collections::BTreeMap;
use std::path::PathBuf;

use instrumenta_core::eval::{run, RunOutcome};
use instrumenta_core::instr::builders::{builtin_operator, square_operator};
use instrumenta_core::normalize::normalize;
use instrumenta_core::oracle::{BoundedDomain, BoundedOracle};
use instrumenta_core::parser::parse;
use instrumenta_core::search::{search, SearchConfig, SearchResult};
use instrumenta_core::typecheck::typecheck;
use instrumenta_core::Program;

fn programs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

fn prep(src: &str) -> Program {
    normalize(&typecheck(&parse(src).unwrap()).unwrap())
}

fn triangular_oracle(p: &Program) -> BoundedOracle {
    let sites = BoundedDomain::nondet_sites(p);
    let mut site_ranges = BTreeMap::new();
    for s in sites {
        site_ranges.insert(s, (1, 8));
    }
    BoundedOracle {
        dom: BoundedDomain {
            default_range: (-3, 3),
            site_ranges,
            step_budget: 10_000,
            max_paths: 100_000,
            exhaustive: true,
        },
    }
}

#[test]
fn triangular_is_verified_with_published_selection() {
    let src = std::fs::read_to_string(programs_dir().join("triangular.cw")).unwrap();
    let p = prep(&src);
    let op = square_operator();
    let oracle = triangular_oracle(&p);
    let outcome = search(&p, &op, &oracle, &SearchConfig::default()).unwrap();
    let SearchResult::Verified { selection, .. } = &outcome.result else {
        panic!("{:?}", outcome.result);
    };
    assert!(outcome.iterations <= 16, "iterations {}", outcome.iterations);
    // The increment must be rewritten with R2 and the square with R4.
    let chosen: Vec<Option<String>> = selection.choices.values().cloned().collect();
    assert!(chosen.contains(&Some("R2".to_string())));
    assert!(chosen.contains(&Some("R4".to_string())));
    // Progress log shape.
    assert_eq!(outcome.progress.len() as u64, outcome.iterations);
    let line = serde_json::to_value(&outcome.progress[0]).unwrap();
    assert!(line["iteration"].is_number());
    assert!(line["candidatesRemaining"].is_number());
}

#[test]
fn mutated_postcondition_yields_replayable_counterexample() {
    let src = std::fs::read_to_string(programs_dir().join("triangular.cw")).unwrap();
    let mutated = src.replace("/ 2)", "/ 2 + 1)");
    assert_ne!(src, mutated);
    let p = prep(&mutated);
    let op = square_operator();
    let oracle = triangular_oracle(&p);
    let outcome = search(&p, &op, &oracle, &SearchConfig::default()).unwrap();
    let SearchResult::Incorrect { trace } = &outcome.result else {
        panic!("{:?}", outcome.result);
    };
    assert!(outcome.iterations <= 16);
    assert!(!trace.is_empty());

    // The back-translated trace replays to the same failure on the original
    // program: extract the nondet draws from the trace and re-run.
    let n = trace
        .iter()
        .find_map(|step| step.state.get("N").cloned())
        .expect("N drawn on the counterexample");
    let mut nd = instrumenta_core::eval::NondetSource::scripted(vec![n]);
    let replay = run(&p, &mut nd, 10_000, true);
    let RunOutcome::AssertFailed { point } = replay.outcome else {
        panic!("{:?}", replay.outcome);
    };
    assert_eq!(point, trace.last().unwrap().point);
}

#[test]
fn assert_false_is_incorrect_with_unit_trace() {
    let p = prep("assert(false);");
    let op = builtin_operator("sum", None).unwrap();
    let oracle = BoundedOracle {
        dom: BoundedDomain::default(),
    };
    let outcome = search(&p, &op, &oracle, &SearchConfig::default()).unwrap();
    let SearchResult::Incorrect { trace } = &outcome.result else {
        panic!("{:?}", outcome.result);
    };
    assert_eq!(trace.len(), 1);
}

#[test]
fn non_exhaustive_oracle_yields_inconclusive() {
    // Writes land out of order, so every rewriting selection trips an added
    // assertion under the non-cancellative operator, and the ⊥-heavy
    // selections cannot be certified.
    let p = prep(
        "Array Int a = const(0); \
         a = store(a, 0, 1); \
         a = store(a, 2, 5); \
         a = store(a, 1, 3); \
         Int r = \\sum(a, 0, 3); \
         assert(r == 9);",
    );
    let op = instrumenta_core::instr::builders::build_aggregation_operator(
        &instrumenta_core::monoid::registry_lookup("sum", None).unwrap(),
        false,
    )
    .unwrap();
    let oracle = BoundedOracle {
        dom: BoundedDomain {
            exhaustive: false,
            ..Default::default()
        },
    };
    let outcome = search(&p, &op, &oracle, &SearchConfig::default()).unwrap();
    assert!(
        matches!(outcome.result, SearchResult::Inconclusive),
        "{:?}",
        outcome.result
    );
}

#[test]
fn parallel_jobs_agree_with_single_worker() {
    let src = std::fs::read_to_string(programs_dir().join("triangular.cw")).unwrap();
    let p = prep(&src);
    let op = square_operator();
    let oracle = triangular_oracle(&p);
    let cfg = SearchConfig {
        jobs: 4,
        ..Default::default()
    };
    let outcome = search(&p, &op, &oracle, &cfg).unwrap();
    assert!(matches!(outcome.result, SearchResult::Verified { .. }));
}
