//! Operator-level behavior: application corner cases, composition, the
//! cancellative in-place update, and declarative operator files.

use std::path::PathBuf;

use instrumenta_core::ast::*;
use instrumenta_core::equiv::structurally_equivalent;
use instrumenta_core::eval::{run, NondetSource, RunOutcome};
use instrumenta_core::instr::builders::{
    build_aggregation_operator, builtin_operator, square_operator,
};
use instrumenta_core::instr::conditions::{check_operator_conditions, CondCheckConfig};
use instrumenta_core::instr::opfile::{load_operator, operator_to_toml};
use instrumenta_core::instr::space::{instrument, instrumentation_space};
use instrumenta_core::instr::{compose, InstrumentationOperator, Selection, StateGen};
use instrumenta_core::monoid::registry_lookup;
use instrumenta_core::normalize::normalize;
use instrumenta_core::parser::parse;
use instrumenta_core::typecheck::typecheck;
use instrumenta_core::value::Value;
use instrumenta_core::Program;

fn prep(src: &str) -> Program {
    normalize(&typecheck(&parse(src).unwrap()).unwrap())
}

fn ops_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../ops")
}

#[test]
fn empty_selection_prepends_ghost_inits_only() {
    let p = prep("Int i = 0; i = i + 1; assert(i == 1);");
    let op = square_operator();
    let space = instrumentation_space(&p, &op);
    let ip = instrument(&p, &op, &space.empty_selection(), true).unwrap();
    let expected = prep(
        "Int x_sq = 0; Int x_shad = 0; Int i = 0; i = i + 1; assert(i == 1);",
    );
    assert!(structurally_equivalent(&ip.program, &expected));
    assert!(ip.added_asserts.is_empty());
}

#[test]
fn ghost_name_clash_reported_or_freshened() {
    let p = prep("Int x_sq = 1; Int y = 0; y = x_sq + 1; assert(y == 2);");
    let op = square_operator();
    let space = instrumentation_space(&p, &op);
    let sel = space.empty_selection();
    let err = instrument(&p, &op, &sel, false).unwrap_err();
    assert!(err.to_string().contains("x_sq"), "{err}");

    let ip = instrument(&p, &op, &sel, true).unwrap();
    typecheck(&ip.program).expect("freshened program type-checks");
}

#[test]
fn compose_unions_parts_and_freshens_duplicates() {
    let max = builtin_operator("max", None).unwrap();
    let sum = builtin_operator("sum", None).unwrap();
    let both = compose(&max, &sum);
    assert_eq!(both.ghosts.len(), 8, "4 + 4 ghosts");
    assert!(matches!(both.invariant, Expr::And(..)));
    // Same-operator composition renames the second copy's ghosts apart.
    let twice = compose(&sum, &sum);
    let names: std::collections::BTreeSet<String> =
        twice.ghosts.iter().map(|g| g.name.clone()).collect();
    assert_eq!(names.len(), twice.ghosts.len(), "ghost names disjoint");

    // Composition with the empty operator changes nothing observable.
    let empty = InstrumentationOperator {
        name: "empty".into(),
        ghosts: vec![],
        rules: vec![],
        invariant: Expr::BoolLit(true),
        aggregator: None,
        state_gen: StateGen::Rejection,
    };
    let same = compose(&sum, &empty);
    assert_eq!(same.ghosts, sum.ghosts);
    assert_eq!(same.rules, sum.rules);

    // A composed operator applies one rule per point, so it handles two
    // different aggregations on two arrays at once; the search finds which
    // rule family belongs to which array.
    let p = prep(
        "Array Int a = const(0); Array Int b = const(0); Int i = 0; \
         while (i < 3) { a = store(a, i, i); b = store(b, i, 2 * i); i = i + 1; } \
         Int s = \\sum(a, 0, 3); Int m = \\max(b, 0, 3); \
         assert(s == 3); assert(m == 4);",
    );
    use instrumenta_core::oracle::{BoundedDomain, BoundedOracle};
    use instrumenta_core::search::{search, SearchConfig, SearchResult};
    let oracle = BoundedOracle {
        dom: BoundedDomain::default(),
    };
    let outcome = search(&p, &both, &oracle, &SearchConfig::default()).unwrap();
    let SearchResult::Verified { selection, .. } = &outcome.result else {
        panic!("{:?}", outcome.result)
    };
    let ip = instrument(&p, &both, selection, true).unwrap();
    assert!(!ip.program.has_aggregates());

    // Composition lemma: the conjoined invariant (hence each component
    // invariant) holds at every block boundary of the composed program.
    let res = run(&ip.program, &mut NondetSource::scripted(vec![]), 100_000, true);
    assert!(matches!(res.outcome, RunOutcome::Terminated(_)));
    let ghost_count = ip.operator.ghosts.len();
    for (k, step) in res.trace.iter().enumerate() {
        if k + 1 < ghost_count {
            continue;
        }
        if ip.origin.contains_key(&step.point) && !ip.block_ends.contains(&step.point) {
            continue;
        }
        let v = instrumenta_core::eval::eval_expr_pure(&both.invariant, &step.state)
            .unwrap_or_else(|e| panic!("invariant eval at step {k}: {e}"));
        assert_eq!(v, Value::Bool(true), "composed invariant at step {k}");
    }
}

#[test]
fn cancellative_in_interval_update() {
    // Tracked interval [0,3) over [1,2,3]; overwriting index 1 with 9 must
    // leave the tracked sum at 6 - 2 + 9 = 13.
    let p = prep(
        "Array Int a = const(0); \
         a = store(a, 0, 1); a = store(a, 1, 2); a = store(a, 2, 3); \
         a = store(a, 1, 9); \
         Int r = \\sum(a, 0, 3); \
         assert(r == 13);",
    );
    let op = build_aggregation_operator(&registry_lookup("sum", None).unwrap(), true).unwrap();
    let space = instrumentation_space(&p, &op);
    let ip = instrument(&p, &op, &space.full_selection(), true).unwrap();
    let res = run(&ip.program, &mut NondetSource::scripted(vec![]), 50_000, false);
    let RunOutcome::Terminated(state) = &res.outcome else {
        panic!("{:?}", res.outcome)
    };
    assert_eq!(state.get("ag_val"), Some(&Value::int(13)));
    assert_eq!(state.get("r"), Some(&Value::int(13)));
}

#[test]
fn non_cancellative_resets_inside_interval() {
    let err = build_aggregation_operator(&registry_lookup("max", None).unwrap(), true)
        .unwrap_err();
    assert!(err.to_string().contains("cancellative"), "{err}");

    // For the non-cancellative operator an inside store resets the tracked
    // interval to a singleton; subsequent aggregation over the old bounds
    // trips the added assertion.
    let p = prep(
        "Array Int a = const(0); \
         a = store(a, 0, 1); a = store(a, 1, 2); a = store(a, 2, 3); \
         a = store(a, 1, 9); \
         Int r = \\max(a, 0, 3); \
         assert(r == 9);",
    );
    let op = builtin_operator("max", None).unwrap();
    let space = instrumentation_space(&p, &op);
    let ip = instrument(&p, &op, &space.full_selection(), true).unwrap();
    let res = run(&ip.program, &mut NondetSource::scripted(vec![]), 50_000, false);
    let RunOutcome::AssertFailed { point } = res.outcome else {
        panic!("{:?}", res.outcome)
    };
    assert!(ip.added_asserts.contains(&point), "an added guard fails");
}

#[test]
fn exists_cancellative_aggregate_applies_finalizer() {
    let pred = LambdaPred::new("x", "i", Expr::eq(Expr::var("x"), Expr::int(3)));
    let op = builtin_operator("exists-cancellative", Some(&pred)).unwrap();
    let agg_rule = op.rule("aggregate").unwrap();
    // The non-empty branch assigns the finalized count `g(ag_val)`.
    let tmpl = agg_rule
        .template
        .iter()
        .map(instrumenta_core::pretty::pretty_stmt)
        .collect::<String>();
    assert!(tmpl.contains("0 < ag_val"), "{tmpl}");

    // End to end: the count-based operator decides an existential.
    let p = prep(
        "Array Int a = const(0); \
         a = store(a, 0, 5); a = store(a, 1, 3); \
         Bool b = \\exists(a, 0, 2, \\lambda(x, i). x == 3); \
         assert(b);",
    );
    let space = instrumentation_space(&p, &op);
    let ip = instrument(&p, &op, &space.full_selection(), true).unwrap();
    assert!(!ip.program.has_aggregates());
    let res = run(&ip.program, &mut NondetSource::scripted(vec![]), 50_000, false);
    assert!(matches!(res.outcome, RunOutcome::Terminated(_)), "{:?}", res.outcome);
}

#[test]
fn builtin_metadata_examples() {
    let sq = square_operator();
    assert_eq!(
        instrumenta_core::pretty::pretty_expr(&sq.invariant),
        "x_sq == x_shad * x_shad"
    );
    let sum = builtin_operator("sum", None).unwrap();
    for g in &sum.ghosts {
        let init = instrumenta_core::pretty::pretty_expr(&g.init);
        assert!(
            init == "0" || init == "const(0)",
            "sum ghost {} initialized to {init}",
            g.name
        );
    }
    assert!(builtin_operator("gibberish", None).is_err());
}

#[test]
fn two_reads_and_one_extremum_give_three_points() {
    let p = prep(
        "Array Int a = const(0); \
         Int x = select(a, 0); \
         Int y = select(a, 1); \
         Int r = \\max(a, 0, 2); \
         assert(x <= r && y <= r);",
    );
    let op = builtin_operator("max", None).unwrap();
    let space = instrumentation_space(&p, &op);
    let mut ids: Vec<&str> = space
        .choices
        .values()
        .flat_map(|v| v.iter().map(|s| s.as_str()))
        .collect();
    ids.sort();
    assert_eq!(ids, vec!["aggregate", "select", "select"]);
}

#[test]
fn operator_file_loads_and_matches_builtin_behavior() {
    let text = std::fs::read_to_string(ops_dir().join("square.op.toml")).unwrap();
    let loaded = load_operator(&text).unwrap();
    assert_eq!(loaded.name, "square");
    assert_eq!(loaded.rules.len(), 4);

    // Conditions hold for the loaded operator (rejection sampling).
    let report = check_operator_conditions(
        &loaded,
        &CondCheckConfig {
            samples: 500,
            int_range: (-6, 6),
            seed: 3,
        },
    );
    assert!(report.all_passed(), "{:?}", report.failures().collect::<Vec<_>>());

    // It instruments the triangular program exactly like the builtin.
    let src = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../programs/triangular.cw"),
    )
    .unwrap();
    let p = prep(&src);
    let space = instrumentation_space(&p, &loaded);
    assert_eq!(space.size(), 16);
    let mut sel = Selection::default();
    for point in &space.points {
        let rules = &space.choices[point];
        let choice = ["R2", "R4"]
            .iter()
            .find(|r| rules.contains(&r.to_string()))
            .map(|r| r.to_string());
        sel.choices.insert(*point, choice);
    }
    let from_file = instrument(&p, &loaded, &sel, true).unwrap();
    let from_builtin = instrument(&p, &square_operator(), &sel, true).unwrap();
    assert!(structurally_equivalent(&from_file.program, &from_builtin.program));
}

#[test]
fn operator_to_toml_roundtrips() {
    let op = square_operator();
    let text = operator_to_toml(&op);
    let loaded = load_operator(&text).unwrap();
    assert_eq!(loaded.ghosts, op.ghosts);
    assert_eq!(loaded.invariant, op.invariant);
    assert_eq!(loaded.rules.len(), op.rules.len());
}

#[test]
fn operator_file_rejects_bad_templates() {
    let assign_foreign = r#"
name = "bad"
[[ghost]]
name = "g"
type = "Int"
init = "0"
[[rule]]
id = "R1"
pattern = "$y = $x + $x"
template = "other = 1; $y = $x + $x;"
[invariant]
formula = "g == g"
"#;
    let err = load_operator(assign_foreign).unwrap_err();
    assert!(err.to_string().contains("non-ghost"), "{err}");

    let loops = r#"
name = "bad"
[[ghost]]
name = "g"
type = "Int"
init = "0"
[[rule]]
id = "R1"
pattern = "$y = $x"
template = "while (true) { g = g; } $y = $x;"
[invariant]
formula = "g == g"
"#;
    let err = load_operator(loops).unwrap_err();
    assert!(err.to_string().contains("loop-free"), "{err}");

    let unbound = r#"
name = "bad"
[[ghost]]
name = "g"
type = "Int"
init = "0"
[[rule]]
id = "R1"
pattern = "$y = $x"
template = "g = $z; $y = $x;"
[invariant]
formula = "g == g"
"#;
    let err = load_operator(unbound).unwrap_err();
    assert!(err.to_string().contains("unbound"), "{err}");
}

#[test]
fn selection_json_roundtrip() {
    let mut sel = Selection::default();
    sel.choices.insert(ControlPointId(3), Some("store".into()));
    sel.choices.insert(ControlPointId(7), None);
    let json = sel.to_json();
    assert_eq!(json["3"], "store");
    assert_eq!(json["7"], "bot");
    let back = Selection::from_json(&json).unwrap();
    assert_eq!(back, sel);
}
