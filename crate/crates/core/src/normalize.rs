//! Normal form: `store`, `select`, quantifier and aggregation expressions may
//! only occur as the entire right-hand side of an assignment (or initialized
//! declaration), with atomic arguments. Rewrite rules match this shape.
//!
//! Temporaries are introduced innermost-first, left-to-right. Conditions of
//! `while`/`if` and the arguments of `assert`/`assume` are purified by
//! hoisting temporaries in front of the statement; for `while`, the hoisted
//! computations are re-run at the end of the loop body.

use std::collections::BTreeMap;

use crate::ast::*;
use crate::typecheck::{type_of_expr, TypedProgram};

/// Normalize a type-correct program. Total: panics only on programs that do
/// not type-check (excluded by the precondition).
pub fn normalize(tp: &TypedProgram) -> Program {
    let p = tp.program();
    let mut cx = Normalizer {
        vocab: p.vocab.clone(),
        namer: FreshNamer::for_program(p),
    };
    let body = cx.norm_stmt(&p.body);
    let mut out = Program::new(cx.vocab, body);
    out.renumber();
    out
}

struct Normalizer {
    vocab: BTreeMap<String, TypeExpr>,
    namer: FreshNamer,
}

fn is_atom(e: &Expr) -> bool {
    matches!(
        e,
        Expr::Var(_) | Expr::IntLit(_) | Expr::BoolLit(_) | Expr::InfLit(_)
    )
}

fn is_extractable(e: &Expr) -> bool {
    matches!(
        e,
        Expr::Store(..) | Expr::Select(..) | Expr::Quant { .. } | Expr::Aggregate { .. }
    )
}

impl Normalizer {
    fn norm_stmt(&mut self, s: &Stmt) -> Stmt {
        match &s.kind {
            StmtKind::Skip => Stmt::skip(),
            StmtKind::Block(ss) => {
                let mut out = Vec::new();
                for inner in ss {
                    let n = self.norm_stmt(inner);
                    match n.kind {
                        // Inline blocks produced by purification.
                        StmtKind::Block(items) => out.extend(items),
                        _ => out.push(n),
                    }
                }
                Stmt::block(out)
            }
            StmtKind::Decl { name, ty, rhs } => {
                let mut pre = Vec::new();
                let rhs = rhs.as_ref().map(|e| self.norm_rhs(e, &mut pre));
                let decl = Stmt::decl(name.clone(), ty.clone(), rhs);
                if pre.is_empty() {
                    decl
                } else {
                    pre.push(decl);
                    Stmt::block(pre)
                }
            }
            StmtKind::Assign { lhs, rhs } => {
                let mut pre = Vec::new();
                let rhs = self.norm_rhs(rhs, &mut pre);
                let assign = Stmt::assign(lhs.clone(), rhs);
                if pre.is_empty() {
                    assign
                } else {
                    pre.push(assign);
                    Stmt::block(pre)
                }
            }
            StmtKind::Assert(e) => self.purify_simple(e, Stmt::assert),
            StmtKind::Assume(e) => self.purify_simple(e, Stmt::assume),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let mut pre = Vec::new();
                let cond = self.purify(cond, &mut pre);
                let stmt = Stmt::if_else(
                    cond,
                    self.norm_stmt(then_branch),
                    self.norm_stmt(else_branch),
                );
                if pre.is_empty() {
                    stmt
                } else {
                    pre.push(stmt);
                    Stmt::block(pre)
                }
            }
            StmtKind::While { cond, body } => {
                let mut pre = Vec::new();
                let cond = self.purify(cond, &mut pre);
                let mut body = match self.norm_stmt(body).kind {
                    StmtKind::Block(items) => items,
                    other => vec![Stmt::new(other)],
                };
                if pre.is_empty() {
                    return Stmt::while_loop(cond, Stmt::block(body));
                }
                // Recompute hoisted temporaries before re-evaluating the
                // condition: decls before the loop, plain assignments at the
                // end of the body.
                for p in &pre {
                    if let StmtKind::Decl {
                        name,
                        rhs: Some(rhs),
                        ..
                    } = &p.kind
                    {
                        body.push(Stmt::assign(name.clone(), rhs.clone()));
                    }
                }
                let mut out = pre;
                out.push(Stmt::while_loop(cond, Stmt::block(body)));
                Stmt::block(out)
            }
        }
    }

    fn purify_simple(&mut self, e: &Expr, make: impl FnOnce(Expr) -> Stmt) -> Stmt {
        let mut pre = Vec::new();
        let e = self.purify(e, &mut pre);
        let stmt = make(e);
        if pre.is_empty() {
            stmt
        } else {
            pre.push(stmt);
            Stmt::block(pre)
        }
    }

    /// Normalize an assignment right-hand side: an extractable node stays at
    /// the top with atomized arguments; anything else is purified.
    fn norm_rhs(&mut self, e: &Expr, pre: &mut Vec<Stmt>) -> Expr {
        match e {
            Expr::Store(a, i, x) => {
                let a = self.atomize(a, pre);
                let i = self.atomize(i, pre);
                let x = self.atomize(x, pre);
                Expr::store(a, i, x)
            }
            Expr::Select(a, i) => {
                let a = self.atomize(a, pre);
                let i = self.atomize(i, pre);
                Expr::select(a, i)
            }
            Expr::Quant {
                kind,
                array,
                lo,
                hi,
                pred,
            } => {
                let array = self.atomize(array, pre);
                let lo = self.atomize(lo, pre);
                let hi = self.atomize(hi, pre);
                Expr::Quant {
                    kind: *kind,
                    array: Box::new(array),
                    lo: Box::new(lo),
                    hi: Box::new(hi),
                    pred: pred.clone(),
                }
            }
            Expr::Aggregate {
                agg,
                array,
                lo,
                hi,
                pred,
            } => {
                let array = self.atomize(array, pre);
                let lo = self.atomize(lo, pre);
                let hi = self.atomize(hi, pre);
                Expr::Aggregate {
                    agg: *agg,
                    array: Box::new(array),
                    lo: Box::new(lo),
                    hi: Box::new(hi),
                    pred: pred.clone(),
                }
            }
            _ => self.purify(e, pre),
        }
    }

    /// Replace every extractable subexpression by a fresh temporary.
    fn purify(&mut self, e: &Expr, pre: &mut Vec<Stmt>) -> Expr {
        if is_extractable(e) {
            return self.extract(e, pre);
        }
        let go = |cx: &mut Self, e: &Expr, pre: &mut Vec<Stmt>| cx.purify(e, pre);
        match e {
            Expr::IntLit(_)
            | Expr::BoolLit(_)
            | Expr::InfLit(_)
            | Expr::Var(_)
            | Expr::Nondet(_)
            | Expr::MetaVar { .. } => e.clone(),
            Expr::Eq(l, r) => Expr::eq(go(self, l, pre), go(self, r, pre)),
            Expr::Leq(l, r) => Expr::leq(go(self, l, pre), go(self, r, pre)),
            Expr::Not(x) => Expr::not(go(self, x, pre)),
            Expr::And(l, r) => Expr::and(go(self, l, pre), go(self, r, pre)),
            Expr::Or(l, r) => Expr::or(go(self, l, pre), go(self, r, pre)),
            Expr::Add(l, r) => Expr::add(go(self, l, pre), go(self, r, pre)),
            Expr::Sub(l, r) => Expr::sub(go(self, l, pre), go(self, r, pre)),
            Expr::Mul(l, r) => Expr::mul(go(self, l, pre), go(self, r, pre)),
            Expr::Div(l, r) => Expr::div(go(self, l, pre), go(self, r, pre)),
            Expr::Ite(c, t, f) => Expr::ite(go(self, c, pre), go(self, t, pre), go(self, f, pre)),
            Expr::ConstArray(x) => Expr::const_array(go(self, x, pre)),
            Expr::Store(..) | Expr::Select(..) | Expr::Quant { .. } | Expr::Aggregate { .. } => {
                unreachable!("handled above")
            }
        }
    }

    /// Introduce `Type t$k = e;` for an extractable node and return `t$k`.
    fn extract(&mut self, e: &Expr, pre: &mut Vec<Stmt>) -> Expr {
        let normalized = self.norm_rhs(e, pre);
        let ty = type_of_expr(&normalized, &self.vocab)
            .expect("normalize precondition: program type-checks");
        let name = self.namer.fresh("t");
        self.vocab.insert(name.clone(), ty.clone());
        pre.push(Stmt::decl(name.clone(), ty, Some(normalized)));
        Expr::Var(name)
    }

    fn atomize(&mut self, e: &Expr, pre: &mut Vec<Stmt>) -> Expr {
        if is_atom(e) {
            return e.clone();
        }
        let purified = if is_extractable(e) {
            return self.extract(e, pre);
        } else {
            self.purify(e, pre)
        };
        if is_atom(&purified) {
            return purified;
        }
        let ty = type_of_expr(&purified, &self.vocab)
            .expect("normalize precondition: program type-checks");
        let name = self.namer.fresh("t");
        self.vocab.insert(name.clone(), ty.clone());
        pre.push(Stmt::decl(name.clone(), ty, Some(purified)));
        Expr::Var(name)
    }
}
