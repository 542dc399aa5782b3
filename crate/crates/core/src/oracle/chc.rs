//! Constrained-Horn-clause export: one uninterpreted predicate per loop
//! head, one clause per loop-free path segment, assertions as false-headed
//! clauses, nondet values unconstrained, division guarded by side clauses.
//!
//! Variables that may hold the extended-integer sentinels are lowered to a
//! `(tag, finite)` pair, with tag -1 / 0 / 1 for negative infinity, finite,
//! positive infinity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::ast::*;
use crate::error::OracleError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sort {
    Int,
    Bool,
    ArrayIntInt,
    ArrayIntBool,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => write!(f, "Int"),
            Sort::Bool => write!(f, "Bool"),
            Sort::ArrayIntInt => write!(f, "(Array Int Int)"),
            Sort::ArrayIntBool => write!(f, "(Array Int Bool)"),
        }
    }
}

fn sort_of(ty: &TypeExpr) -> Result<Sort, OracleError> {
    match ty {
        TypeExpr::Int => Ok(Sort::Int),
        TypeExpr::Bool => Ok(Sort::Bool),
        TypeExpr::Array(elem) => match **elem {
            TypeExpr::Int => Ok(Sort::ArrayIntInt),
            TypeExpr::Bool => Ok(Sort::ArrayIntBool),
            _ => Err(OracleError::UnsupportedNode(
                "nested array types".to_string(),
            )),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Int(BigInt),
    Bool(bool),
    App(String, Vec<Term>),
}

impl Term {
    fn app(op: &str, args: Vec<Term>) -> Term {
        Term::App(op.to_string(), args)
    }

    fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => {
                for a in args {
                    a.free_vars(out);
                }
            }
            _ => {}
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Int(n) => {
                if n.sign() == num_bigint::Sign::Minus {
                    write!(f, "(- {})", -n)
                } else {
                    write!(f, "{n}")
                }
            }
            Term::Bool(b) => write!(f, "{b}"),
            Term::App(op, args) => {
                write!(f, "({op}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// How a program variable appears in predicate signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamLayout {
    Plain(Sort),
    /// `(tag Int, finite Int)` pair for possibly-infinite variables.
    Ext,
}

#[derive(Debug, Clone)]
pub struct PredInfo {
    pub name: String,
    /// The loop-head control point.
    pub point: ControlPointId,
    /// Program variables in signature order.
    pub params: Vec<(String, ParamLayout)>,
}

#[derive(Debug, Clone)]
pub struct ChcScript {
    pub text: String,
    pub preds: Vec<PredInfo>,
}

/// Encode a quantifier- and aggregation-free program.
pub fn encode_chc(p: &Program) -> Result<ChcScript, OracleError> {
    if p.has_aggregates() {
        return Err(OracleError::UnsupportedNode(
            "quantifier or aggregation expression (instrument first)".to_string(),
        ));
    }
    let may_inf = may_inf_vars(p)?;
    let live = live_vars(p);

    let mut enc = Encoder {
        vocab: &p.vocab,
        may_inf,
        live: live.clone(),
        sym_sorts: BTreeMap::new(),
        counter: 0,
        clauses: Vec::new(),
        preds: Vec::new(),
        expanded: BTreeSet::new(),
    };

    let init = enc.fresh_ctx()?;
    let stmts = flatten(&p.body);
    let _ = enc.process(&stmts, init)?;

    let mut text = String::from("(set-logic HORN)\n");
    for pred in &enc.preds {
        let mut sorts = Vec::new();
        for (_, layout) in &pred.params {
            match layout {
                ParamLayout::Plain(s) => sorts.push(s.to_string()),
                ParamLayout::Ext => {
                    sorts.push(Sort::Int.to_string());
                    sorts.push(Sort::Int.to_string());
                }
            }
        }
        text.push_str(&format!(
            "(declare-fun {} ({}) Bool)\n",
            pred.name,
            sorts.join(" ")
        ));
    }
    for c in &enc.clauses {
        text.push_str(c);
        text.push('\n');
    }
    text.push_str("(check-sat)\n(get-model)\n");
    Ok(ChcScript {
        text,
        preds: enc.preds,
    })
}

/// Variables that may hold an infinite sentinel, by fixpoint over
/// assignments. Arrays may not carry sentinels.
fn may_inf_vars(p: &Program) -> Result<BTreeSet<String>, OracleError> {
    fn expr_may_inf(e: &Expr, set: &BTreeSet<String>) -> bool {
        match e {
            Expr::InfLit(_) => true,
            Expr::Var(v) => set.contains(v),
            Expr::Ite(_, t, f) => expr_may_inf(t, set) || expr_may_inf(f, set),
            _ => false,
        }
    }
    let mut set = BTreeSet::new();
    loop {
        let mut changed = false;
        let mut err = None;
        p.body.visit(&mut |s| {
            if let Some((lhs, rhs)) = s.as_assignment() {
                if expr_may_inf(rhs, &set) && set.insert(lhs.to_string()) {
                    changed = true;
                }
                // Sentinels stored into arrays are not representable.
                let mut stack = vec![rhs];
                while let Some(e) = stack.pop() {
                    if let Expr::Store(_, _, v) = e {
                        if expr_may_inf(v, &set) {
                            err = Some(OracleError::UnsupportedNode(
                                "array element holding an extended integer".to_string(),
                            ));
                        }
                    }
                    visit_children(e, &mut |c| stack.push(c));
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if !changed {
            return Ok(set);
        }
    }
}

/// Variables read anywhere in the program (the predicate vocabulary).
fn live_vars(p: &Program) -> Vec<String> {
    let mut read = BTreeSet::new();
    p.body.visit(&mut |s| match &s.kind {
        StmtKind::Decl { rhs: Some(e), .. }
        | StmtKind::Assign { rhs: e, .. }
        | StmtKind::Assert(e)
        | StmtKind::Assume(e)
        | StmtKind::While { cond: e, .. }
        | StmtKind::If { cond: e, .. } => e.free_vars(&mut read),
        _ => {}
    });
    read.into_iter().filter(|v| p.vocab.contains_key(v)).collect()
}

fn flatten(s: &Stmt) -> Vec<&Stmt> {
    match &s.kind {
        StmtKind::Block(ss) => ss.iter().flat_map(flatten).collect(),
        _ => vec![s],
    }
}

/// SMT-LIB simple symbols cannot contain primes.
fn sanitize(name: &str) -> String {
    name.replace('\'', "!p")
}

#[derive(Debug, Clone)]
enum Val {
    Plain(Term),
    Ext { tag: Term, fin: Term },
}

#[derive(Debug, Clone)]
struct Ctx {
    phi: Vec<Term>,
    sigma: BTreeMap<String, Val>,
}

struct Encoder<'a> {
    vocab: &'a BTreeMap<String, TypeExpr>,
    may_inf: BTreeSet<String>,
    live: Vec<String>,
    sym_sorts: BTreeMap<String, Sort>,
    counter: u64,
    clauses: Vec<String>,
    preds: Vec<PredInfo>,
    expanded: BTreeSet<ControlPointId>,
}

impl<'a> Encoder<'a> {
    fn fresh_sym(&mut self, base: &str, sort: Sort) -> Term {
        self.counter += 1;
        let name = format!("{}!{}", sanitize(base), self.counter);
        self.sym_sorts.insert(name.clone(), sort);
        Term::Var(name)
    }

    /// A context binding every program variable to fresh symbols.
    fn fresh_ctx(&mut self) -> Result<Ctx, OracleError> {
        let mut sigma = BTreeMap::new();
        for (v, ty) in self.vocab.iter() {
            sigma.insert(v.clone(), self.fresh_val(v, ty)?);
        }
        Ok(Ctx {
            phi: Vec::new(),
            sigma,
        })
    }

    fn fresh_val(&mut self, v: &str, ty: &TypeExpr) -> Result<Val, OracleError> {
        if self.may_inf.contains(v) {
            Ok(Val::Ext {
                tag: self.fresh_sym(&format!("{v}.tag"), Sort::Int),
                fin: self.fresh_sym(v, Sort::Int),
            })
        } else {
            Ok(Val::Plain(self.fresh_sym(v, sort_of(ty)?)))
        }
    }

    fn pred_args(&self, ctx: &Ctx) -> Vec<Term> {
        let mut args = Vec::new();
        for v in &self.live {
            match ctx.sigma.get(v).expect("all vars in sigma") {
                Val::Plain(t) => args.push(t.clone()),
                Val::Ext { tag, fin } => {
                    args.push(tag.clone());
                    args.push(fin.clone());
                }
            }
        }
        args
    }

    fn pred_for(&mut self, point: ControlPointId) -> String {
        if let Some(p) = self.preds.iter().find(|p| p.point == point) {
            return p.name.clone();
        }
        let name = format!("inv_{}", point.0);
        let params = self
            .live
            .iter()
            .map(|v| {
                let layout = if self.may_inf.contains(v) {
                    ParamLayout::Ext
                } else {
                    ParamLayout::Plain(sort_of(&self.vocab[v]).expect("checked in fresh_ctx"))
                };
                (v.clone(), layout)
            })
            .collect();
        self.preds.push(PredInfo {
            name: name.clone(),
            point,
            params,
        });
        name
    }

    fn emit(&mut self, body: &[Term], head: Term) {
        let mut vars = BTreeSet::new();
        for t in body {
            t.free_vars(&mut vars);
        }
        head.free_vars(&mut vars);
        let body_term = match body.len() {
            0 => Term::Bool(true),
            1 => body[0].clone(),
            _ => Term::app("and", body.to_vec()),
        };
        let implication = Term::app("=>", vec![body_term, head]);
        let clause = if vars.is_empty() {
            format!("(assert {implication})")
        } else {
            let bindings: Vec<String> = vars
                .iter()
                .map(|v| format!("({v} {})", self.sym_sorts[v]))
                .collect();
            format!("(assert (forall ({}) {implication}))", bindings.join(" "))
        };
        self.clauses.push(clause);
    }

    /// Process a statement sequence; returns the fall-through contexts.
    fn process(&mut self, stmts: &[&Stmt], ctx: Ctx) -> Result<Vec<Ctx>, OracleError> {
        let Some((first, rest)) = stmts.split_first() else {
            return Ok(vec![ctx]);
        };
        match &first.kind {
            StmtKind::Skip => self.process(rest, ctx),
            StmtKind::Block(_) => {
                let mut items = flatten(first);
                items.extend_from_slice(rest);
                self.process(&items, ctx)
            }
            StmtKind::Decl { name, ty, rhs } => {
                let mut ctx = ctx;
                let val = match rhs {
                    Some(e) => self.expr(e, &mut ctx, first.id)?,
                    None => default_val(ty)?,
                };
                self.bind(&mut ctx, name, val)?;
                self.process(rest, ctx)
            }
            StmtKind::Assign { lhs, rhs } => {
                let mut ctx = ctx;
                let val = self.expr(rhs, &mut ctx, first.id)?;
                self.bind(&mut ctx, lhs, val)?;
                self.process(rest, ctx)
            }
            StmtKind::Assert(e) => {
                let mut ctx = ctx;
                let c = self.bool_term(e, &mut ctx, first.id)?;
                let mut body = ctx.phi.clone();
                body.push(Term::app("not", vec![c.clone()]));
                self.emit(&body, Term::Bool(false));
                ctx.phi.push(c);
                self.process(rest, ctx)
            }
            StmtKind::Assume(e) => {
                let mut ctx = ctx;
                let c = self.bool_term(e, &mut ctx, first.id)?;
                ctx.phi.push(c);
                self.process(rest, ctx)
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let mut ctx = ctx;
                let c = self.bool_term(cond, &mut ctx, first.id)?;
                let mut then_ctx = ctx.clone();
                then_ctx.phi.push(c.clone());
                let mut else_ctx = ctx;
                else_ctx.phi.push(Term::app("not", vec![c]));
                let mut outs = Vec::new();
                for out in self.process(&flatten(then_branch), then_ctx)? {
                    outs.extend(self.process(rest, out)?);
                }
                for out in self.process(&flatten(else_branch), else_ctx)? {
                    outs.extend(self.process(rest, out)?);
                }
                Ok(outs)
            }
            StmtKind::While { cond, body } => {
                let pred = self.pred_for(first.id);
                // Entry clause.
                let args = self.pred_args(&ctx);
                self.emit(&ctx.phi, Term::app(&pred, args));

                if self.expanded.insert(first.id) {
                    // Back-edge clauses.
                    let mut head_ctx = self.fresh_ctx()?;
                    let entry_args = self.pred_args(&head_ctx);
                    head_ctx.phi.push(Term::app(&pred, entry_args));
                    let c = self.bool_term(cond, &mut head_ctx, first.id)?;
                    head_ctx.phi.push(c);
                    for out in self.process(&flatten(body), head_ctx)? {
                        let args = self.pred_args(&out);
                        let head = Term::app(&pred, args);
                        self.emit(&out.phi, head);
                    }
                }

                // Exit context.
                let mut exit_ctx = self.fresh_ctx()?;
                let exit_args = self.pred_args(&exit_ctx);
                exit_ctx.phi.push(Term::app(&pred, exit_args));
                let c = self.bool_term(cond, &mut exit_ctx, first.id)?;
                exit_ctx.phi.push(Term::app("not", vec![c]));
                self.process(rest, exit_ctx)
            }
        }
    }

    fn bind(&mut self, ctx: &mut Ctx, name: &str, val: Val) -> Result<(), OracleError> {
        let val = if self.may_inf.contains(name) {
            match val {
                Val::Ext { .. } => val,
                Val::Plain(t) => Val::Ext {
                    tag: Term::Int(BigInt::zero()),
                    fin: t,
                },
            }
        } else {
            match val {
                Val::Plain(_) => val,
                Val::Ext { .. } => {
                    return Err(OracleError::UnsupportedNode(format!(
                        "extended-integer value flows into plain variable `{name}`"
                    )))
                }
            }
        };
        ctx.sigma.insert(name.to_string(), val);
        Ok(())
    }

    fn bool_term(
        &mut self,
        e: &Expr,
        ctx: &mut Ctx,
        point: ControlPointId,
    ) -> Result<Term, OracleError> {
        match self.expr(e, ctx, point)? {
            Val::Plain(t) => Ok(t),
            Val::Ext { .. } => Err(OracleError::UnsupportedNode(
                "extended integer in Boolean position".to_string(),
            )),
        }
    }

    fn plain(
        &mut self,
        e: &Expr,
        ctx: &mut Ctx,
        point: ControlPointId,
    ) -> Result<Term, OracleError> {
        match self.expr(e, ctx, point)? {
            Val::Plain(t) => Ok(t),
            // Arithmetic and indexing require finite operands; paths where a
            // sentinel reaches them fault at runtime rather than failing an
            // assertion, so those paths are dropped by constraining the tag.
            Val::Ext { tag, fin } => {
                ctx.phi
                    .push(Term::app("=", vec![tag, Term::Int(BigInt::zero())]));
                Ok(fin)
            }
        }
    }

    fn expr(&mut self, e: &Expr, ctx: &mut Ctx, point: ControlPointId) -> Result<Val, OracleError> {
        let val = match e {
            Expr::IntLit(n) => Val::Plain(Term::Int(n.clone())),
            Expr::BoolLit(b) => Val::Plain(Term::Bool(*b)),
            Expr::InfLit(pos) => Val::Ext {
                tag: Term::Int(if *pos { BigInt::from(1) } else { BigInt::from(-1) }),
                fin: Term::Int(BigInt::zero()),
            },
            Expr::Var(v) => ctx
                .sigma
                .get(v)
                .cloned()
                .ok_or_else(|| OracleError::UnsupportedNode(format!("unbound variable `{v}`")))?,
            Expr::Nondet(ty) => {
                let ty = ty.as_ref().ok_or_else(|| {
                    OracleError::UnsupportedNode("untyped nondet".to_string())
                })?;
                Val::Plain(self.fresh_sym("nondet", sort_of(ty)?))
            }
            Expr::MetaVar { .. } => {
                return Err(OracleError::UnsupportedNode("meta-variable".to_string()))
            }
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) => {
                let op = match e {
                    Expr::Add(..) => "+",
                    Expr::Sub(..) => "-",
                    _ => "*",
                };
                let a = self.plain(l, ctx, point)?;
                let b = self.plain(r, ctx, point)?;
                Val::Plain(Term::app(op, vec![a, b]))
            }
            Expr::Div(l, r) => {
                let a = self.plain(l, ctx, point)?;
                let b = self.plain(r, ctx, point)?;
                // Division by zero is refutable on this path.
                let mut body = ctx.phi.clone();
                body.push(Term::app("=", vec![b.clone(), Term::Int(BigInt::zero())]));
                self.emit(&body, Term::Bool(false));
                // SMT-LIB `div` is Euclidean; align it with truncation
                // toward zero for negative dividends.
                let q = Term::app("div", vec![a.clone(), b.clone()]);
                let trunc = Term::app(
                    "ite",
                    vec![
                        Term::app(
                            "or",
                            vec![
                                Term::app(
                                    "=",
                                    vec![
                                        Term::app("mod", vec![a.clone(), b.clone()]),
                                        Term::Int(BigInt::zero()),
                                    ],
                                ),
                                Term::app(">=", vec![a, Term::Int(BigInt::zero())]),
                            ],
                        ),
                        q.clone(),
                        Term::app(
                            "ite",
                            vec![
                                Term::app(">", vec![b, Term::Int(BigInt::zero())]),
                                Term::app("+", vec![q.clone(), Term::Int(BigInt::from(1))]),
                                Term::app("-", vec![q, Term::Int(BigInt::from(1))]),
                            ],
                        ),
                    ],
                );
                Val::Plain(trunc)
            }
            Expr::Eq(l, r) => {
                let a = self.expr(l, ctx, point)?;
                let b = self.expr(r, ctx, point)?;
                match (a, b) {
                    (Val::Plain(a), Val::Plain(b)) => Val::Plain(Term::app("=", vec![a, b])),
                    (a, b) => {
                        let (ta, fa) = promote(a);
                        let (tb, fb) = promote(b);
                        Val::Plain(Term::app(
                            "and",
                            vec![
                                Term::app("=", vec![ta.clone(), tb]),
                                Term::app(
                                    "or",
                                    vec![
                                        Term::app(
                                            "not",
                                            vec![Term::app(
                                                "=",
                                                vec![ta, Term::Int(BigInt::zero())],
                                            )],
                                        ),
                                        Term::app("=", vec![fa, fb]),
                                    ],
                                ),
                            ],
                        ))
                    }
                }
            }
            Expr::Leq(l, r) => {
                let a = self.expr(l, ctx, point)?;
                let b = self.expr(r, ctx, point)?;
                match (a, b) {
                    (Val::Plain(a), Val::Plain(b)) => Val::Plain(Term::app("<=", vec![a, b])),
                    (a, b) => {
                        let (ta, fa) = promote(a);
                        let (tb, fb) = promote(b);
                        Val::Plain(Term::app(
                            "or",
                            vec![
                                Term::app("=", vec![ta.clone(), Term::Int(BigInt::from(-1))]),
                                Term::app("=", vec![tb.clone(), Term::Int(BigInt::from(1))]),
                                Term::app(
                                    "and",
                                    vec![
                                        Term::app("=", vec![ta, Term::Int(BigInt::zero())]),
                                        Term::app("=", vec![tb, Term::Int(BigInt::zero())]),
                                        Term::app("<=", vec![fa, fb]),
                                    ],
                                ),
                            ],
                        ))
                    }
                }
            }
            Expr::Not(x) => {
                let t = self.bool_term(x, ctx, point)?;
                Val::Plain(Term::app("not", vec![t]))
            }
            Expr::And(l, r) | Expr::Or(l, r) => {
                let op = if matches!(e, Expr::And(..)) { "and" } else { "or" };
                let a = self.bool_term(l, ctx, point)?;
                let b = self.bool_term(r, ctx, point)?;
                Val::Plain(Term::app(op, vec![a, b]))
            }
            Expr::Ite(c, t, f) => {
                let c = self.bool_term(c, ctx, point)?;
                let a = self.expr(t, ctx, point)?;
                let b = self.expr(f, ctx, point)?;
                match (a, b) {
                    (Val::Plain(a), Val::Plain(b)) => {
                        Val::Plain(Term::app("ite", vec![c, a, b]))
                    }
                    (a, b) => {
                        let (ta, fa) = promote(a);
                        let (tb, fb) = promote(b);
                        Val::Ext {
                            tag: Term::app("ite", vec![c.clone(), ta, tb]),
                            fin: Term::app("ite", vec![c, fa, fb]),
                        }
                    }
                }
            }
            Expr::ConstArray(x) => {
                let fill = self.plain(x, ctx, point)?;
                let sort = match type_of_simple(x, self.vocab) {
                    Some(TypeExpr::Bool) => "(Array Int Bool)",
                    _ => "(Array Int Int)",
                };
                Val::Plain(Term::app(&format!("(as const {sort})"), vec![fill]))
            }
            Expr::Select(a, i) => {
                let arr = self.plain(a, ctx, point)?;
                let idx = self.plain(i, ctx, point)?;
                Val::Plain(Term::app("select", vec![arr, idx]))
            }
            Expr::Store(a, i, x) => {
                let arr = self.plain(a, ctx, point)?;
                let idx = self.plain(i, ctx, point)?;
                let val = self.plain(x, ctx, point)?;
                Val::Plain(Term::app("store", vec![arr, idx, val]))
            }
            Expr::Quant { .. } | Expr::Aggregate { .. } => {
                return Err(OracleError::UnsupportedNode(
                    "quantifier or aggregation expression".to_string(),
                ))
            }
        };
        Ok(val)
    }
}

fn promote(v: Val) -> (Term, Term) {
    match v {
        Val::Plain(t) => (Term::Int(BigInt::zero()), t),
        Val::Ext { tag, fin } => (tag, fin),
    }
}

fn default_val(ty: &TypeExpr) -> Result<Val, OracleError> {
    Ok(Val::Plain(match ty {
        TypeExpr::Int => Term::Int(BigInt::zero()),
        TypeExpr::Bool => Term::Bool(false),
        TypeExpr::Array(elem) => {
            let sort = sort_of(ty)?;
            let fill = match **elem {
                TypeExpr::Bool => Term::Bool(false),
                _ => Term::Int(BigInt::zero()),
            };
            Term::App(format!("(as const {sort})"), vec![fill])
        }
    }))
}

/// Shallow type synthesis for const-array fills (literals and variables).
fn type_of_simple(e: &Expr, vocab: &BTreeMap<String, TypeExpr>) -> Option<TypeExpr> {
    match e {
        Expr::IntLit(_) | Expr::InfLit(_) => Some(TypeExpr::Int),
        Expr::BoolLit(_) => Some(TypeExpr::Bool),
        Expr::Var(v) => vocab.get(v).cloned(),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::normalize;
    use crate::parser::parse;
    use crate::typecheck::typecheck;

    fn encode_src(src: &str) -> ChcScript {
        let p = normalize(&typecheck(&parse(src).unwrap()).unwrap());
        encode_chc(&p).unwrap()
    }

    #[test]
    fn skip_program_is_vacuous() {
        let s = encode_src("skip;");
        assert!(s.text.contains("(set-logic HORN)"));
        assert!(!s.text.contains("declare-fun"));
        assert!(s.text.contains("(check-sat)"));
    }

    #[test]
    fn loop_produces_one_predicate() {
        let s = encode_src(
            "Int i = 0; Int N = nondet; while (i < N) { i = i + 1; } assert(i >= 0);",
        );
        assert_eq!(s.preds.len(), 1);
        assert_eq!(s.text.matches("declare-fun").count(), 1);
    }

    #[test]
    fn nonlinear_term_survives_encoding() {
        let s = encode_src("Int N = nondet; Int NN = N * N; assert(NN >= 0);");
        assert!(s.text.contains("(* "), "{}", s.text);
    }

    #[test]
    fn aggregates_are_rejected() {
        let p = normalize(
            &typecheck(&parse("Array Int a = const(0); Int r = \\sum(a, 0, 3); assert(r == 0);").unwrap())
                .unwrap(),
        );
        assert!(matches!(
            encode_chc(&p),
            Err(OracleError::UnsupportedNode(_))
        ));
    }

    #[test]
    fn division_emits_guard_clause() {
        let s = encode_src("Int x = nondet; Int y = x / 2; assert(y * 2 <= x);");
        // one clause refuting divisor == 0 plus the assert clause
        assert!(s.text.contains("(= 2 0)") || s.text.contains("(= 0 2)"), "{}", s.text);
    }
}
