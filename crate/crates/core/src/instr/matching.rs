//! Pattern matching of rewrite rules against assignment statements, and
//! template instantiation.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use crate::ast::*;
use crate::instr::RewriteRule;

/// A successful match: meta-variable bindings plus the matched left-hand
/// side. `lhs_in_rhs` signals that the rewrite needs a fresh left-hand side.
#[derive(Debug, Clone)]
pub struct MatchResult {
    pub subst: BTreeMap<String, Expr>,
    pub lhs: String,
    pub lhs_in_rhs: bool,
}

/// Match a rule against an assignment-like statement (`x = e` or
/// `Type x = e`).
pub fn match_rule(rule: &RewriteRule, stmt: &Stmt) -> Option<MatchResult> {
    let (lhs, rhs) = stmt.as_assignment()?;
    let mut subst = BTreeMap::new();
    if !match_expr(&rule.pattern, rhs, &mut subst) {
        return None;
    }
    Some(MatchResult {
        subst,
        lhs: lhs.to_string(),
        lhs_in_rhs: rhs.mentions_var(lhs),
    })
}

fn meta_admits(kind: MetaKind, target: &Expr) -> bool {
    match kind {
        MetaKind::Expr => true,
        MetaKind::Var => matches!(target, Expr::Var(_)),
        MetaKind::Lit => target.is_literal(),
    }
}

/// Structural matching; repeated meta-variables must bind equal expressions.
fn match_expr(pattern: &Expr, target: &Expr, subst: &mut BTreeMap<String, Expr>) -> bool {
    match (pattern, target) {
        (Expr::MetaVar { name, kind }, t) => {
            if !meta_admits(*kind, t) {
                return false;
            }
            match subst.get(name) {
                Some(bound) => bound == t,
                None => {
                    subst.insert(name.clone(), t.clone());
                    true
                }
            }
        }
        (Expr::IntLit(a), Expr::IntLit(b)) => a == b,
        (Expr::BoolLit(a), Expr::BoolLit(b)) => a == b,
        (Expr::InfLit(a), Expr::InfLit(b)) => a == b,
        (Expr::Var(a), Expr::Var(b)) => a == b,
        (Expr::Eq(l1, r1), Expr::Eq(l2, r2))
        | (Expr::Leq(l1, r1), Expr::Leq(l2, r2))
        | (Expr::And(l1, r1), Expr::And(l2, r2))
        | (Expr::Or(l1, r1), Expr::Or(l2, r2))
        | (Expr::Add(l1, r1), Expr::Add(l2, r2))
        | (Expr::Sub(l1, r1), Expr::Sub(l2, r2))
        | (Expr::Mul(l1, r1), Expr::Mul(l2, r2))
        | (Expr::Div(l1, r1), Expr::Div(l2, r2)) => {
            match_expr(l1, l2, subst) && match_expr(r1, r2, subst)
        }
        (Expr::Not(a), Expr::Not(b)) | (Expr::ConstArray(a), Expr::ConstArray(b)) => {
            match_expr(a, b, subst)
        }
        (Expr::Ite(c1, t1, f1), Expr::Ite(c2, t2, f2)) => {
            match_expr(c1, c2, subst) && match_expr(t1, t2, subst) && match_expr(f1, f2, subst)
        }
        (Expr::Select(a1, i1), Expr::Select(a2, i2)) => {
            match_expr(a1, a2, subst) && match_expr(i1, i2, subst)
        }
        (Expr::Store(a1, i1, x1), Expr::Store(a2, i2, x2)) => {
            match_expr(a1, a2, subst) && match_expr(i1, i2, subst) && match_expr(x1, x2, subst)
        }
        (
            Expr::Quant {
                kind: k1,
                array: a1,
                lo: l1,
                hi: h1,
                pred: p1,
            },
            Expr::Quant {
                kind: k2,
                array: a2,
                lo: l2,
                hi: h2,
                pred: p2,
            },
        ) => {
            k1 == k2
                && p1.alpha_eq(p2)
                && match_expr(a1, a2, subst)
                && match_expr(l1, l2, subst)
                && match_expr(h1, h2, subst)
        }
        (
            Expr::Aggregate {
                agg: g1,
                array: a1,
                lo: l1,
                hi: h1,
                pred: p1,
            },
            Expr::Aggregate {
                agg: g2,
                array: a2,
                lo: l2,
                hi: h2,
                pred: p2,
            },
        ) => {
            g1 == g2
                && match (p1, p2) {
                    (None, None) => true,
                    (Some(x), Some(y)) => x.alpha_eq(y),
                    _ => false,
                }
                && match_expr(a1, a2, subst)
                && match_expr(l1, l2, subst)
                && match_expr(h1, h2, subst)
        }
        _ => false,
    }
}

/// Replace meta-variables by their bindings and fold literal arithmetic
/// (templates express `α²` as `$alpha * $alpha`, which must print as a
/// single literal once `α` is a constant).
pub fn subst_template_expr(e: &Expr, subst: &BTreeMap<String, Expr>) -> Expr {
    fold_constants(&subst_metas(e, subst))
}

fn subst_metas(e: &Expr, subst: &BTreeMap<String, Expr>) -> Expr {
    let go = |e: &Expr| subst_metas(e, subst);
    match e {
        Expr::MetaVar { name, .. } => subst
            .get(name)
            .cloned()
            .unwrap_or_else(|| panic!("unbound meta-variable ${name} in template")),
        Expr::IntLit(_) | Expr::BoolLit(_) | Expr::InfLit(_) | Expr::Var(_) | Expr::Nondet(_) => {
            e.clone()
        }
        Expr::Eq(l, r) => Expr::eq(go(l), go(r)),
        Expr::Leq(l, r) => Expr::leq(go(l), go(r)),
        Expr::Not(x) => Expr::not(go(x)),
        Expr::And(l, r) => Expr::and(go(l), go(r)),
        Expr::Or(l, r) => Expr::or(go(l), go(r)),
        Expr::Add(l, r) => Expr::add(go(l), go(r)),
        Expr::Sub(l, r) => Expr::sub(go(l), go(r)),
        Expr::Mul(l, r) => Expr::mul(go(l), go(r)),
        Expr::Div(l, r) => Expr::div(go(l), go(r)),
        Expr::Ite(c, t, f) => Expr::ite(go(c), go(t), go(f)),
        Expr::ConstArray(x) => Expr::const_array(go(x)),
        Expr::Select(a, i) => Expr::select(go(a), go(i)),
        Expr::Store(a, i, x) => Expr::store(go(a), go(i), go(x)),
        Expr::Quant {
            kind,
            array,
            lo,
            hi,
            pred,
        } => Expr::Quant {
            kind: *kind,
            array: Box::new(go(array)),
            lo: Box::new(go(lo)),
            hi: Box::new(go(hi)),
            pred: pred.clone(),
        },
        Expr::Aggregate {
            agg,
            array,
            lo,
            hi,
            pred,
        } => Expr::Aggregate {
            agg: *agg,
            array: Box::new(go(array)),
            lo: Box::new(go(lo)),
            hi: Box::new(go(hi)),
            pred: pred.clone(),
        },
    }
}

/// Fold `+`, `-`, `*` over pairs of integer literals, bottom-up. Comparisons
/// and Boolean operators are left untouched.
pub fn fold_constants(e: &Expr) -> Expr {
    let go = fold_constants;
    match e {
        Expr::Add(l, r) => fold_binop(go(l), go(r), Expr::add, |a, b| a + b),
        Expr::Sub(l, r) => fold_binop(go(l), go(r), Expr::sub, |a, b| a - b),
        Expr::Mul(l, r) => fold_binop(go(l), go(r), Expr::mul, |a, b| a * b),
        Expr::Div(l, r) => Expr::div(go(l), go(r)),
        Expr::Eq(l, r) => Expr::eq(go(l), go(r)),
        Expr::Leq(l, r) => Expr::leq(go(l), go(r)),
        Expr::Not(x) => Expr::not(go(x)),
        Expr::And(l, r) => Expr::and(go(l), go(r)),
        Expr::Or(l, r) => Expr::or(go(l), go(r)),
        Expr::Ite(c, t, f) => Expr::ite(go(c), go(t), go(f)),
        Expr::ConstArray(x) => Expr::const_array(go(x)),
        Expr::Select(a, i) => Expr::select(go(a), go(i)),
        Expr::Store(a, i, x) => Expr::store(go(a), go(i), go(x)),
        _ => e.clone(),
    }
}

fn fold_binop(
    l: Expr,
    r: Expr,
    rebuild: impl FnOnce(Expr, Expr) -> Expr,
    f: impl FnOnce(&BigInt, &BigInt) -> BigInt,
) -> Expr {
    match (&l, &r) {
        (Expr::IntLit(a), Expr::IntLit(b)) => Expr::IntLit(f(a, b)),
        _ => rebuild(l, r),
    }
}

/// Instantiate a template statement under a substitution. Assignments to the
/// rule's left-hand-side meta (`$r = ...`) become assignments to
/// `lhs_target`.
pub fn subst_template_stmt(
    s: &Stmt,
    subst: &BTreeMap<String, Expr>,
    lhs_meta: &str,
    lhs_target: &str,
) -> Stmt {
    let kind = match &s.kind {
        StmtKind::Skip => StmtKind::Skip,
        StmtKind::Decl { name, ty, rhs } => StmtKind::Decl {
            name: name.clone(),
            ty: ty.clone(),
            rhs: rhs.as_ref().map(|e| subst_template_expr(e, subst)),
        },
        StmtKind::Assign { lhs, rhs } => {
            let lhs = if lhs == &format!("${lhs_meta}") {
                lhs_target.to_string()
            } else {
                lhs.clone()
            };
            StmtKind::Assign {
                lhs,
                rhs: subst_template_expr(rhs, subst),
            }
        }
        StmtKind::Block(ss) => StmtKind::Block(
            ss.iter()
                .map(|s| subst_template_stmt(s, subst, lhs_meta, lhs_target))
                .collect(),
        ),
        StmtKind::While { cond, body } => StmtKind::While {
            cond: subst_template_expr(cond, subst),
            body: Box::new(subst_template_stmt(body, subst, lhs_meta, lhs_target)),
        },
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => StmtKind::If {
            cond: subst_template_expr(cond, subst),
            then_branch: Box::new(subst_template_stmt(then_branch, subst, lhs_meta, lhs_target)),
            else_branch: Box::new(subst_template_stmt(else_branch, subst, lhs_meta, lhs_target)),
        },
        StmtKind::Assert(e) => StmtKind::Assert(subst_template_expr(e, subst)),
        StmtKind::Assume(e) => StmtKind::Assume(subst_template_expr(e, subst)),
    };
    Stmt::new(kind)
}

/// Does this template statement (or any nested statement) assign to the
/// rule's left-hand-side meta?
pub fn assigns_lhs_meta(s: &Stmt, lhs_meta: &str) -> bool {
    let marker = format!("${lhs_meta}");
    let mut found = false;
    s.visit(&mut |s| {
        if let StmtKind::Assign { lhs, .. } = &s.kind {
            if lhs == &marker {
                found = true;
            }
        }
    });
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse, parse_schematic_expr, parse_schematic_stmts};

    fn rule(id: &str, pattern: &str, template: &str) -> RewriteRule {
        RewriteRule {
            id: id.into(),
            lhs_meta: "y".into(),
            pattern: parse_schematic_expr(pattern).unwrap(),
            template: parse_schematic_stmts(template).unwrap(),
        }
    }

    fn second_stmt(src: &str) -> Stmt {
        let p = parse(src).unwrap();
        let StmtKind::Block(ss) = &p.body.kind else {
            panic!()
        };
        ss[1].clone()
    }

    #[test]
    fn square_rule_matches_square_assignment() {
        let r4 = rule("R4", "$x * $x", "assert($x == x_shad); $y = x_sq;");
        let stmt = second_stmt("Int N = 2; Int NN = 0; NN = N * N;");
        let p = parse("Int N = 2; Int NN = N * N;").unwrap();
        let StmtKind::Block(ss) = &p.body.kind else {
            panic!()
        };
        let m = match_rule(&r4, &ss[1]).expect("decl with rhs matches");
        assert_eq!(m.lhs, "NN");
        assert_eq!(m.subst["x"], Expr::var("N"));
        assert!(!m.lhs_in_rhs);
        let _ = stmt;
    }

    #[test]
    fn mismatched_shape_fails() {
        let r4 = rule("R4", "$x * $x", "$y = x_sq;");
        let stmt = second_stmt("Int y = 0; y = 1 + 2;");
        assert!(match_rule(&r4, &stmt).is_none());
        // nonlinear meta: both sides must be equal
        let stmt = second_stmt("Int y = 0; y = y * 2;");
        assert!(match_rule(&r4, &stmt).is_none());
    }

    #[test]
    fn store_with_lhs_occurrence_sets_flag() {
        let r = RewriteRule {
            id: "store".into(),
            lhs_meta: "a2".into(),
            pattern: parse_schematic_expr("store($a, $i, $x)").unwrap(),
            template: vec![],
        };
        let stmt = second_stmt("Array Int a = const(0); a = store(a, 0, a[0] + 1);");
        let m = match_rule(&r, &stmt).unwrap();
        assert!(m.lhs_in_rhs);
        assert_eq!(m.subst["a"], Expr::var("a"));
    }

    #[test]
    fn literal_meta_kind() {
        let r2 = rule("R2", "$x + $alpha:lit", "$y = $x + $alpha;");
        assert!(match_rule(&r2, &second_stmt("Int i = 0; i = i + 1;")).is_some());
        assert!(
            match_rule(&r2, &second_stmt("Int s = 0; s = s + s;")).is_none(),
            "non-literal α must not match"
        );
    }

    #[test]
    fn constant_folding_in_templates() {
        let mut subst = BTreeMap::new();
        subst.insert("alpha".to_string(), Expr::int(1));
        subst.insert("x".to_string(), Expr::var("i"));
        let t = parse_schematic_expr("x_sq + 2 * $alpha * $x + $alpha * $alpha").unwrap();
        let out = subst_template_expr(&t, &subst);
        assert_eq!(
            crate::pretty::pretty_expr(&out),
            "x_sq + 2 * i + 1"
        );
    }
}
