//! Structural equivalence of programs up to a bijective renaming of
//! generated variables (names containing `$` or ending in a prime) and
//! ignoring control point ids.

use std::collections::BTreeMap;

use crate::ast::*;

#[derive(Default)]
struct Bijection {
    fwd: BTreeMap<String, String>,
    bwd: BTreeMap<String, String>,
}

impl Bijection {
    fn relate(&mut self, a: &str, b: &str) -> bool {
        match (self.fwd.get(a), self.bwd.get(b)) {
            (None, None) => {
                self.fwd.insert(a.to_string(), b.to_string());
                self.bwd.insert(b.to_string(), a.to_string());
                true
            }
            (Some(x), Some(y)) => x == b && y == a,
            _ => false,
        }
    }

    fn names_eq(&mut self, a: &str, b: &str) -> bool {
        match (is_generated_name(a), is_generated_name(b)) {
            (false, false) => a == b,
            (true, true) => self.relate(a, b),
            _ => false,
        }
    }
}

/// True iff the two programs are equal up to a bijective renaming of
/// instrumentation-introduced fresh variables, modulo control point ids.
pub fn structurally_equivalent(p1: &Program, p2: &Program) -> bool {
    let mut bij = Bijection::default();
    stmt_eq(&p1.body, &p2.body, &mut bij)
}

fn stmt_eq(a: &Stmt, b: &Stmt, bij: &mut Bijection) -> bool {
    match (&a.kind, &b.kind) {
        (StmtKind::Skip, StmtKind::Skip) => true,
        (
            StmtKind::Decl {
                name: n1,
                ty: t1,
                rhs: r1,
            },
            StmtKind::Decl {
                name: n2,
                ty: t2,
                rhs: r2,
            },
        ) => {
            t1 == t2
                && bij.names_eq(n1, n2)
                && match (r1, r2) {
                    (None, None) => true,
                    (Some(e1), Some(e2)) => expr_eq(e1, e2, bij),
                    _ => false,
                }
        }
        (StmtKind::Assign { lhs: l1, rhs: r1 }, StmtKind::Assign { lhs: l2, rhs: r2 }) => {
            bij.names_eq(l1, l2) && expr_eq(r1, r2, bij)
        }
        (StmtKind::Block(s1), StmtKind::Block(s2)) => {
            s1.len() == s2.len() && s1.iter().zip(s2).all(|(x, y)| stmt_eq(x, y, bij))
        }
        (StmtKind::While { cond: c1, body: b1 }, StmtKind::While { cond: c2, body: b2 }) => {
            expr_eq(c1, c2, bij) && stmt_eq(b1, b2, bij)
        }
        (
            StmtKind::If {
                cond: c1,
                then_branch: t1,
                else_branch: e1,
            },
            StmtKind::If {
                cond: c2,
                then_branch: t2,
                else_branch: e2,
            },
        ) => expr_eq(c1, c2, bij) && stmt_eq(t1, t2, bij) && stmt_eq(e1, e2, bij),
        (StmtKind::Assert(e1), StmtKind::Assert(e2)) => expr_eq(e1, e2, bij),
        (StmtKind::Assume(e1), StmtKind::Assume(e2)) => expr_eq(e1, e2, bij),
        _ => false,
    }
}

fn expr_eq(a: &Expr, b: &Expr, bij: &mut Bijection) -> bool {
    match (a, b) {
        (Expr::IntLit(x), Expr::IntLit(y)) => x == y,
        (Expr::BoolLit(x), Expr::BoolLit(y)) => x == y,
        (Expr::InfLit(x), Expr::InfLit(y)) => x == y,
        (Expr::Nondet(_), Expr::Nondet(_)) => true,
        (Expr::Var(x), Expr::Var(y)) => bij.names_eq(x, y),
        (Expr::MetaVar { name: n1, kind: k1 }, Expr::MetaVar { name: n2, kind: k2 }) => {
            n1 == n2 && k1 == k2
        }
        (Expr::Eq(l1, r1), Expr::Eq(l2, r2))
        | (Expr::Leq(l1, r1), Expr::Leq(l2, r2))
        | (Expr::And(l1, r1), Expr::And(l2, r2))
        | (Expr::Or(l1, r1), Expr::Or(l2, r2))
        | (Expr::Add(l1, r1), Expr::Add(l2, r2))
        | (Expr::Sub(l1, r1), Expr::Sub(l2, r2))
        | (Expr::Mul(l1, r1), Expr::Mul(l2, r2))
        | (Expr::Div(l1, r1), Expr::Div(l2, r2)) => {
            expr_eq(l1, l2, bij) && expr_eq(r1, r2, bij)
        }
        (Expr::Not(x), Expr::Not(y)) | (Expr::ConstArray(x), Expr::ConstArray(y)) => {
            expr_eq(x, y, bij)
        }
        (Expr::Ite(c1, t1, f1), Expr::Ite(c2, t2, f2)) => {
            expr_eq(c1, c2, bij) && expr_eq(t1, t2, bij) && expr_eq(f1, f2, bij)
        }
        (Expr::Select(a1, i1), Expr::Select(a2, i2)) => {
            expr_eq(a1, a2, bij) && expr_eq(i1, i2, bij)
        }
        (Expr::Store(a1, i1, x1), Expr::Store(a2, i2, x2)) => {
            expr_eq(a1, a2, bij) && expr_eq(i1, i2, bij) && expr_eq(x1, x2, bij)
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
                && expr_eq(a1, a2, bij)
                && expr_eq(l1, l2, bij)
                && expr_eq(h1, h2, bij)
                && p1.alpha_eq(p2)
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
                && expr_eq(a1, a2, bij)
                && expr_eq(l1, l2, bij)
                && expr_eq(h1, h2, bij)
                && match (p1, p2) {
                    (None, None) => true,
                    (Some(x), Some(y)) => x.alpha_eq(y),
                    _ => false,
                }
        }
        _ => false,
    }
}
