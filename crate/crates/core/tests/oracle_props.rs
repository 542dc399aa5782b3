//! Oracle-level properties: counterexample back-translation, replay
//! soundness, and (when an external solver is configured) agreement between
//! the two back ends on decisive verdicts.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Duration;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use instrumenta_core::ast::LambdaPred;
use instrumenta_core::error::OracleError;
use instrumenta_core::eval::{run, NondetSource, RunOutcome};
use instrumenta_core::instr::builders::builtin_operator;
use instrumenta_core::instr::space::{instrument, instrumentation_space};
use instrumenta_core::normalize::normalize;
use instrumenta_core::oracle::solver::{ChcOracle, SOLVER_ENV};
use instrumenta_core::oracle::witness::back_translate_cex;
use instrumenta_core::oracle::{check_bounded, BoundedDomain, Oracle, OracleBudget, OracleVerdict};
use instrumenta_core::parser::{parse, parse_expr};
use instrumenta_core::typecheck::typecheck;
use instrumenta_core::Program;

fn prep(src: &str) -> Program {
    normalize(&typecheck(&parse(src).unwrap()).unwrap())
}

fn programs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

#[test]
fn cex_back_translation_units() {
    // Failing original assertion: the projected trace replays to the same
    // failure on the original program.
    let p = prep(
        "Array Int a = const(0); Int i = 0; \
         while (i < 3) { a = store(a, i, i); i = i + 1; } \
         Int r = \\sum(a, 0, 3); assert(r == 99);",
    );
    let op = builtin_operator("sum", None).unwrap();
    let space = instrumentation_space(&p, &op);
    let ip = instrument(&p, &op, &space.full_selection(), true).unwrap();
    let OracleVerdict::Incorrect { trace } = check_bounded(&ip.program, &BoundedDomain::default())
    else {
        panic!()
    };
    let back = back_translate_cex(&trace, &ip).unwrap();
    assert!(!back.is_empty());
    // Projected states carry no ghost bindings.
    for step in &back {
        for name in step.state.names() {
            assert!(!ip.ghost_vocab.contains(name), "ghost {name} leaked");
        }
    }
    let replay = run(&p, &mut NondetSource::scripted(vec![]), 10_000, true);
    let RunOutcome::AssertFailed { point } = replay.outcome else {
        panic!()
    };
    assert_eq!(point, back.last().unwrap().point);

    // Failing added assertion: back-translation refuses.
    let p2 = prep(
        "Array Int a = const(0); \
         a = store(a, 2, 5); a = store(a, 0, 1); \
         Int r = \\sum(a, 0, 3); assert(r == 6);",
    );
    let space2 = instrumentation_space(&p2, &op);
    let ip2 = instrument(&p2, &op, &space2.full_selection(), true).unwrap();
    let OracleVerdict::Incorrect { trace } =
        check_bounded(&ip2.program, &BoundedDomain::default())
    else {
        panic!()
    };
    assert!(ip2.added_asserts.contains(&trace.last().unwrap().point));
    assert!(matches!(
        back_translate_cex(&trace, &ip2),
        Err(OracleError::NotOriginalAssertion)
    ));

    // Empty instrumentation: projection is the identity on points.
    let p3 = prep("Int x = 1; assert(x == 0);");
    let space3 = instrumentation_space(&p3, &op);
    let ip3 = instrument(&p3, &op, &space3.empty_selection(), true).unwrap();
    let OracleVerdict::Incorrect { trace } =
        check_bounded(&ip3.program, &BoundedDomain::default())
    else {
        panic!()
    };
    let back = back_translate_cex(&trace, &ip3).unwrap();
    let orig_points: Vec<_> = back.iter().map(|s| s.point).collect();
    let run_orig = run(&p3, &mut NondetSource::scripted(vec![]), 100, true);
    let direct: Vec<_> = run_orig.trace.iter().map(|s| s.point).collect();
    assert_eq!(orig_points, direct);
}

#[test]
fn incorrect_traces_replay_to_their_failures() {
    // Replay soundness of the bounded backend on random programs.
    let mut rng = StdRng::seed_from_u64(6);
    let mut found = 0;
    while found < 30 {
        let threshold = rng.gen_range(-2..=2);
        let n = rng.gen_range(1..=3);
        let src = format!(
            "Array Int a = const(0); Int i = 0; \
             while (i < {n}) {{ a = store(a, i, nondet); i = i + 1; }} \
             Int r = \\sum(a, 0, {n}); assert(r <= {threshold});"
        );
        let p = prep(&src);
        let dom = BoundedDomain {
            default_range: (-2, 2),
            ..Default::default()
        };
        match check_bounded(&p, &dom) {
            OracleVerdict::Incorrect { trace } => {
                found += 1;
                // Re-drive the program with the draws extracted from the
                // trace; it must fail at the same point.
                let final_state = &trace.last().unwrap().state;
                let mut draws = Vec::new();
                for k in 0..n {
                    let v = final_state
                        .get("a")
                        .and_then(|v| match v {
                            instrumenta_core::value::Value::Array(arr) => {
                                Some(arr.select(&num_bigint::BigInt::from(k)))
                            }
                            _ => None,
                        })
                        .unwrap();
                    draws.push(v);
                }
                let replay = run(&p, &mut NondetSource::scripted(draws), 10_000, false);
                let RunOutcome::AssertFailed { point } = replay.outcome else {
                    panic!("{:?}", replay.outcome)
                };
                assert_eq!(point, trace.last().unwrap().point);
            }
            _ => continue,
        }
    }
}

/// Agreement between the bounded and CHC back ends on decisive verdicts.
/// Requires an external solver; prints a SKIP line otherwise.
#[test]
fn oracle_agreement_on_decisive_programs() {
    let Ok(cmd) = std::env::var(SOLVER_ENV) else {
        println!("SKIP: {} not configured", SOLVER_ENV);
        return;
    };
    let chc = ChcOracle::new(cmd, Duration::from_secs(20));
    let pred = LambdaPred::new("x", "i", parse_expr("0 <= x").unwrap());
    let _ = &pred;
    let mut rng = StdRng::seed_from_u64(77);
    let mut compared = 0;
    let mut attempts = 0;
    while compared < 200 && attempts < 2000 {
        attempts += 1;
        let n = rng.gen_range(1..=3);
        let bias: i64 = rng.gen_range(-1..=3);
        let ok = rng.gen_bool(0.5);
        let bound = if ok { 2 * n + bias.max(0) } else { -1 - bias.abs() };
        let src = format!(
            "Int i = 0; Int s = 0; \
             while (i < {n}) {{ s = s + 2; i = i + 1; }} \
             assert(s - {bound} <= s && s <= {bound} || s <= {bound});"
        );
        let p = prep(&src);
        let bounded_verdict = check_bounded(&p, &BoundedDomain::default());
        let chc_verdict = chc.check(&p, OracleBudget::default()).unwrap();
        match (&bounded_verdict, &chc_verdict) {
            (OracleVerdict::Correct { .. }, OracleVerdict::Correct { .. })
            | (OracleVerdict::Incorrect { .. }, OracleVerdict::Incorrect { .. }) => {
                compared += 1;
            }
            (OracleVerdict::Unknown { .. }, _) | (_, OracleVerdict::Unknown { .. }) => {}
            (a, b) => panic!("verdicts disagree on:\n{src}\nbounded={a:?} chc={b:?}"),
        }
    }
    let _ = BTreeSet::<u32>::new();
    println!("compared {compared} decisive verdict pairs");
}

#[test]
fn fig5_program_shape() {
    let text = std::fs::read_to_string(programs_dir().join("quantified_fill.cw")).unwrap();
    let p = parse(&text).unwrap();
    let mut whiles = 0;
    let mut quants = 0;
    p.body.visit(&mut |s| {
        if matches!(s.kind, instrumenta_core::ast::StmtKind::While { .. }) {
            whiles += 1;
        }
    });
    p.body.visit_exprs(&mut |e| {
        let mut stack = vec![e];
        while let Some(e) = stack.pop() {
            if matches!(
                e,
                instrumenta_core::ast::Expr::Quant {
                    kind: instrumenta_core::ast::QuantKind::Forall,
                    ..
                }
            ) {
                quants += 1;
            }
            instrumenta_core::ast::visit_children(e, &mut |c| stack.push(c));
        }
    });
    assert_eq!(whiles, 1);
    assert_eq!(quants, 1);
    // Round trip reproduces an equal AST.
    let printed = instrumenta_core::pretty::pretty_print(&p);
    assert_eq!(parse(&printed).unwrap(), p);
}

#[test]
fn no_matching_statements_gives_singleton_space() {
    let p = prep("Int x = nondet; assume(x == 1); assert(x == 1);");
    // The square operator's R1 matches literal initializations only; a
    // nondet declaration matches nothing.
    let op = instrumenta_core::instr::builders::square_operator();
    let space = instrumentation_space(&p, &op);
    assert!(space.points.is_empty());
    assert_eq!(space.size(), 1);
    let sel = space.empty_selection();
    let ip = instrument(&p, &op, &sel, true).unwrap();
    assert_eq!(ip.added_asserts.len(), 0);
}

#[test]
fn aggregation_operator_invariants_hold_initially() {
    use instrumenta_core::eval::eval_expr_pure;
    use instrumenta_core::instr::initial_ghost_state;
    use instrumenta_core::value::Value;
    for name in ["max", "min", "sum", "product"] {
        let op = builtin_operator(name, None).unwrap();
        let state = initial_ghost_state(&op).unwrap();
        assert_eq!(
            eval_expr_pure(&op.invariant, &state).unwrap(),
            Value::Bool(true),
            "{name}: invariant at initial ghost values"
        );
    }
}
