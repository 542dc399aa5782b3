//! Frontend properties: parse ∘ pretty-print is the identity on ASTs
//! (modulo control point ids), and normalization is an idempotent,
//! behavior-preserving transformation.

use proptest::prelude::*;

use instrumenta_core::ast::*;
use instrumenta_core::eval::{run, NondetSource, RunOutcome};
use instrumenta_core::normalize::normalize;
use instrumenta_core::parser::parse;
use instrumenta_core::pretty::pretty_print;
use instrumenta_core::typecheck::typecheck;

fn ident() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("a".to_string()),
        Just("b".to_string()),
        Just("x".to_string()),
        Just("y".to_string()),
        Just("n0".to_string()),
        Just("long_name".to_string()),
        Just("v'".to_string()),
        Just("w$1".to_string()),
    ]
}

fn lambda() -> impl Strategy<Value = LambdaPred> {
    // Flat bodies only: lambda bodies may not recurse back into the
    // quantified-expression strategies.
    let leaf = || {
        prop_oneof![
            any::<i32>().prop_map(|n| Expr::IntLit(n.into())),
            ident().prop_map(Expr::Var),
        ]
    };
    let body = prop_oneof![
        (leaf(), leaf()).prop_map(|(l, r)| Expr::eq(l, r)),
        (leaf(), leaf()).prop_map(|(l, r)| Expr::leq(l, r)),
        (leaf(), leaf()).prop_map(|(l, r)| Expr::eq(Expr::mul(l, Expr::int(2)), r)),
    ];
    (ident(), ident(), body).prop_map(|(v, i, body)| LambdaPred::new(v, i, body))
}

fn expr(depth: u32) -> BoxedStrategy<Expr> {
    let leaf = prop_oneof![
        any::<i64>().prop_map(|n| Expr::IntLit(n.into())),
        any::<bool>().prop_map(Expr::BoolLit),
        Just(Expr::InfLit(false)),
        Just(Expr::InfLit(true)),
        ident().prop_map(Expr::Var),
    ];
    if depth == 0 {
        return leaf.boxed();
    }
    let sub = expr(depth - 1);
    let sub2 = expr(depth - 1);
    let sub3 = expr(depth - 1);
    prop_oneof![
        4 => leaf,
        1 => (sub.clone(), sub2.clone()).prop_map(|(l, r)| Expr::eq(l, r)),
        1 => (sub.clone(), sub2.clone()).prop_map(|(l, r)| Expr::leq(l, r)),
        1 => (sub.clone(), sub2.clone()).prop_map(|(l, r)| Expr::and(l, r)),
        1 => (sub.clone(), sub2.clone()).prop_map(|(l, r)| Expr::or(l, r)),
        1 => (sub.clone(), sub2.clone()).prop_map(|(l, r)| Expr::add(l, r)),
        1 => (sub.clone(), sub2.clone()).prop_map(|(l, r)| Expr::sub(l, r)),
        1 => (sub.clone(), sub2.clone()).prop_map(|(l, r)| Expr::mul(l, r)),
        1 => (sub.clone(), sub2.clone()).prop_map(|(l, r)| Expr::div(l, r)),
        1 => sub.clone().prop_map(Expr::not),
        1 => sub.clone().prop_map(Expr::const_array),
        1 => (sub.clone(), sub2.clone()).prop_map(|(a, i)| Expr::select(a, i)),
        1 => (sub.clone(), sub2.clone(), sub3.clone())
            .prop_map(|(a, i, x)| Expr::store(a, i, x)),
        1 => (sub.clone(), sub2.clone(), sub3.clone())
            .prop_map(|(c, t, e)| Expr::ite(c, t, e)),
        1 => (any::<bool>(), sub.clone(), sub2.clone(), sub3.clone(), lambda()).prop_map(
            |(fa, a, lo, hi, pred)| Expr::Quant {
                kind: if fa { QuantKind::Forall } else { QuantKind::Exists },
                array: Box::new(a),
                lo: Box::new(lo),
                hi: Box::new(hi),
                pred,
            }
        ),
        1 => (0u8..5u8, sub, sub2, sub3, lambda()).prop_map(|(k, a, lo, hi, pred)| {
            let agg = match k {
                0 => AggName::Sum,
                1 => AggName::Min,
                2 => AggName::Max,
                3 => AggName::Product,
                _ => AggName::Numof,
            };
            Expr::Aggregate {
                agg,
                array: Box::new(a),
                lo: Box::new(lo),
                hi: Box::new(hi),
                pred: agg.takes_pred().then_some(pred),
            }
        }),
    ]
    .boxed()
}

fn type_expr() -> impl Strategy<Value = TypeExpr> {
    prop_oneof![
        Just(TypeExpr::Int),
        Just(TypeExpr::Bool),
        Just(TypeExpr::array(TypeExpr::Int)),
        Just(TypeExpr::array(TypeExpr::Bool)),
    ]
}

/// Statements in exactly the shape the parser produces.
fn stmt(depth: u32) -> BoxedStrategy<Stmt> {
    let simple = prop_oneof![
        Just(Stmt::skip()),
        (ident(), expr(2)).prop_map(|(v, e)| Stmt::assign(v, e)),
        (ident(), type_expr(), prop::option::of(expr(2)))
            .prop_map(|(v, t, e)| Stmt::decl(v, t, e)),
        (ident(), type_expr())
            .prop_map(|(v, t)| Stmt::decl(v, t.clone(), Some(Expr::Nondet(Some(t))))),
        expr(2).prop_map(Stmt::assert),
        expr(2).prop_map(Stmt::assume),
    ];
    if depth == 0 {
        return simple.boxed();
    }
    let body = prop::collection::vec(stmt(depth - 1), 0..3).prop_map(Stmt::block);
    let else_branch = prop_oneof![
        2 => Just(Stmt::skip()),
        1 => prop::collection::vec(stmt(depth - 1), 1..3).prop_map(Stmt::block),
    ];
    prop_oneof![
        5 => simple,
        1 => (expr(2), body.clone()).prop_map(|(c, b)| Stmt::while_loop(c, b)),
        1 => (expr(2), body, else_branch).prop_map(|(c, t, e)| Stmt::if_else(c, t, e)),
    ]
    .boxed()
}

fn program() -> impl Strategy<Value = Program> {
    prop::collection::vec(stmt(2), 1..8).prop_map(|stmts| {
        let mut vocab = std::collections::BTreeMap::new();
        let body = Stmt::block(stmts.clone());
        // Vocabulary from declarations, as the parser would build it.
        body.visit(&mut |s| {
            if let StmtKind::Decl { name, ty, .. } = &s.kind {
                vocab.insert(name.clone(), ty.clone());
            }
        });
        let mut p = Program::new(vocab, body);
        p.renumber();
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1100, ..ProptestConfig::default() })]

    #[test]
    fn parse_pretty_roundtrip(p in program()) {
        let printed = pretty_print(&p);
        let reparsed = parse(&printed)
            .unwrap_or_else(|e| panic!("reparse failed: {e}\n{printed}"));
        prop_assert_eq!(&p, &reparsed, "round trip changed the AST:\n{}", printed);
    }
}

// ---------------------------------------------------------------------
// Normalization properties on seeded well-typed programs.
// ---------------------------------------------------------------------

fn gen_typed_src(rng: &mut rand::rngs::StdRng) -> String {
    use rand::Rng;
    let mut out = String::new();
    out.push_str("Array Int a = const(0);\nInt x = 0;\nInt y = 1;\n");
    for _ in 0..rng.gen_range(1..6) {
        match rng.gen_range(0..7) {
            0 => out.push_str(&format!(
                "a = store(a, {}, select(a, {}) + {});\n",
                rng.gen_range(0..3),
                rng.gen_range(0..3),
                rng.gen_range(-2..=2)
            )),
            1 => out.push_str(&format!(
                "x = select(store(a, {}, y), {});\n",
                rng.gen_range(0..3),
                rng.gen_range(0..3)
            )),
            2 => out.push_str("y = x + y;\n"),
            3 => out.push_str(&format!(
                "x = \\sum(a, 0, {}) + \\max(a, 0, {});\n",
                rng.gen_range(0..4),
                rng.gen_range(1..4)
            )),
            4 => out.push_str(&format!(
                "if (select(a, {}) <= x) {{ y = y + 1; }} else {{ y = y - 1; }}\n",
                rng.gen_range(0..3)
            )),
            5 => {
                let n = rng.gen_range(1..3);
                out.push_str(&format!(
                    "while (select(a, x) <= {n} && x <= 2) {{ a = store(a, x, x); x = x + 1; }}\n"
                ));
            }
            _ => out.push_str("x = nondet;\n"),
        }
    }
    out.push_str("assert(x <= 99);\n");
    out
}

#[test]
fn large_program_roundtrips() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    let mut src = String::from("Int x = 0;\nArray Int a = const(0);\n");
    // Several hundred statements with nested structure.
    for k in 0..300 {
        match k % 5 {
            0 => src.push_str(&format!("x = x + {};\n", rng.gen_range(-9..=9))),
            1 => src.push_str(&format!("a = store(a, {}, x * x);\n", rng.gen_range(0..9))),
            2 => src.push_str(&format!(
                "if (x <= {}) {{ x = x - 1; }} else {{ x = 0; }}\n",
                rng.gen_range(0..9)
            )),
            3 => src.push_str(&format!(
                "while (x < {}) {{ x = x + 2; }}\n",
                rng.gen_range(0..5)
            )),
            _ => src.push_str(&format!(
                "assert(\\sum(a, 0, {}) <= x || true);\n",
                rng.gen_range(0..6)
            )),
        }
    }
    let p = parse(&src).unwrap();
    let mut nodes = 0;
    p.body.visit(&mut |_| nodes += 1);
    assert!(nodes > 500, "generated {nodes} statements");
    let printed = pretty_print(&p);
    assert_eq!(parse(&printed).unwrap(), p);
}

#[test]
fn normalize_is_idempotent_and_behavior_preserving() {
    use rand::SeedableRng;
    let mut rng = rand::rngs::StdRng::seed_from_u64(99);
    for round in 0..200 {
        let src = gen_typed_src(&mut rng);
        let p = parse(&src).unwrap();
        let tp = typecheck(&p).unwrap_or_else(|e| panic!("{src}\n{e:?}"));
        let n1 = normalize(&tp);
        let n2 = normalize(&typecheck(&n1).unwrap());
        assert_eq!(n1, n2, "normalize not idempotent (round {round}):\n{src}");

        // Differential execution against the original on shared draws.
        use rand::Rng;
        let script: Vec<i64> = (0..10).map(|_| rng.gen_range(-3..=3)).collect();
        let orig = run(
            &tp.clone().into_program(),
            &mut NondetSource::scripted_ints(&script),
            5_000,
            false,
        );
        let norm = run(
            &n1,
            &mut NondetSource::scripted_ints(&script),
            10_000,
            false,
        );
        match (&orig.outcome, &norm.outcome) {
            (RunOutcome::Terminated(s1), RunOutcome::Terminated(s2)) => {
                let keys: Vec<&String> = tp.program().vocab.keys().collect();
                for k in keys {
                    assert_eq!(s1.get(k), s2.get(k), "variable {k} differs:\n{src}");
                }
            }
            (RunOutcome::AssertFailed { .. }, RunOutcome::AssertFailed { .. })
            | (RunOutcome::Blocked { .. }, RunOutcome::Blocked { .. })
            | (RunOutcome::BudgetExceeded, _)
            | (_, RunOutcome::BudgetExceeded) => {}
            (RunOutcome::RuntimeError { kind: k1, .. }, RunOutcome::RuntimeError { kind: k2, .. }) => {
                assert_eq!(k1, k2, "{src}");
            }
            (a, b) => panic!("outcomes diverge: {a:?} vs {b:?}\n{src}"),
        }
    }
}

#[test]
fn normalized_shape_invariant() {
    use rand::SeedableRng;
    let mut rng = rand::rngs::StdRng::seed_from_u64(123);
    for _ in 0..100 {
        let src = gen_typed_src(&mut rng);
        let n = normalize(&typecheck(&parse(&src).unwrap()).unwrap());
        // Every extractable node occurs only as the entire right-hand side
        // of an assignment, with atomic arguments.
        n.body.visit(&mut |s| {
            let check_pure = |e: &Expr| {
                let mut stack = vec![e];
                while let Some(e) = stack.pop() {
                    assert!(
                        !matches!(
                            e,
                            Expr::Store(..) | Expr::Select(..) | Expr::Quant { .. } | Expr::Aggregate { .. }
                        ),
                        "extractable node left in non-rhs position:\n{src}"
                    );
                    visit_children(e, &mut |c| stack.push(c));
                }
            };
            match &s.kind {
                StmtKind::Assign { rhs, .. } | StmtKind::Decl { rhs: Some(rhs), .. } => {
                    match rhs {
                        Expr::Store(a, i, x) => {
                            for arg in [a, i, x] {
                                assert!(is_atom(arg), "non-atomic store argument:\n{src}");
                            }
                        }
                        Expr::Select(a, i) => {
                            for arg in [a, i] {
                                assert!(is_atom(arg), "non-atomic select argument:\n{src}");
                            }
                        }
                        Expr::Quant { array, lo, hi, .. }
                        | Expr::Aggregate { array, lo, hi, .. } => {
                            for arg in [array, lo, hi] {
                                assert!(is_atom(arg), "non-atomic interval argument:\n{src}");
                            }
                        }
                        other => check_pure(other),
                    }
                }
                StmtKind::Assert(e) | StmtKind::Assume(e) => check_pure(e),
                StmtKind::While { cond, .. } | StmtKind::If { cond, .. } => check_pure(cond),
                _ => {}
            }
        });
    }
}

fn is_atom(e: &Expr) -> bool {
    matches!(
        e,
        Expr::Var(_) | Expr::IntLit(_) | Expr::BoolLit(_) | Expr::InfLit(_)
    )
}
