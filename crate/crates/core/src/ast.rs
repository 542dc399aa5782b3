//! Abstract syntax of the core language.
//!
//! Programs are written over a flat vocabulary of typed variables and use
//! functional (SMT-LIB style) arrays. On top of the base imperative language
//! there are quantified expressions over array intervals, aggregation
//! (extended quantifiers) such as `\sum` and `\max`, `nondet`, `ite`, and the
//! extended-integer literals `neginf`/`posinf` that only ghost code produces.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

/// Program types. Array indices are always `Int`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TypeExpr {
    Int,
    Bool,
    Array(Box<TypeExpr>),
}

impl TypeExpr {
    pub fn array(elem: TypeExpr) -> TypeExpr {
        TypeExpr::Array(Box::new(elem))
    }

    pub fn elem_type(&self) -> Option<&TypeExpr> {
        match self {
            TypeExpr::Array(e) => Some(e),
            _ => None,
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Int => write!(f, "Int"),
            TypeExpr::Bool => write!(f, "Bool"),
            TypeExpr::Array(e) => write!(f, "Array {e}"),
        }
    }
}

/// Identifier of a statement; dense, assigned in pre-order by the parser and
/// by every transformation that rebuilds a program.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct ControlPointId(pub u32);

impl fmt::Display for ControlPointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Quantifier kind for `quant` expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuantKind {
    Forall,
    Exists,
}

impl QuantKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            QuantKind::Forall => "\\forall",
            QuantKind::Exists => "\\exists",
        }
    }
}

/// Aggregations available as surface syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AggName {
    Sum,
    Min,
    Max,
    Product,
    Numof,
}

impl AggName {
    pub fn keyword(&self) -> &'static str {
        match self {
            AggName::Sum => "\\sum",
            AggName::Min => "\\min",
            AggName::Max => "\\max",
            AggName::Product => "\\product",
            AggName::Numof => "\\numof",
        }
    }

    /// Whether the surface form takes a trailing lambda predicate.
    pub fn takes_pred(&self) -> bool {
        matches!(self, AggName::Numof)
    }
}

/// Binary predicate `\lambda (value, index) . body` used by quantifiers,
/// `\numof`, and operator definitions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LambdaPred {
    pub value_var: String,
    pub index_var: String,
    pub body: Box<Expr>,
}

impl LambdaPred {
    pub fn new(value_var: impl Into<String>, index_var: impl Into<String>, body: Expr) -> Self {
        LambdaPred {
            value_var: value_var.into(),
            index_var: index_var.into(),
            body: Box::new(body),
        }
    }

    /// Instantiate the predicate body at a (value, index) expression pair.
    pub fn apply(&self, value: &Expr, index: &Expr) -> Expr {
        let mut map = BTreeMap::new();
        map.insert(self.value_var.clone(), value.clone());
        map.insert(self.index_var.clone(), index.clone());
        subst_vars(&self.body, &map)
    }

    /// Equality up to renaming of the two bound variables.
    pub fn alpha_eq(&self, other: &LambdaPred) -> bool {
        let canon_a = self.apply(&Expr::var("$v"), &Expr::var("$i"));
        let canon_b = other.apply(&Expr::var("$v"), &Expr::var("$i"));
        canon_a == canon_b
    }
}

/// Kinds of meta-variables in rewrite-rule patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetaKind {
    /// Matches any expression.
    Expr,
    /// Matches a variable reference only.
    Var,
    /// Matches an integer or Boolean literal only.
    Lit,
}

/// Expressions. `MetaVar` never occurs in parsed source programs; it is used
/// by rewrite-rule patterns and templates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    IntLit(BigInt),
    BoolLit(bool),
    /// Extended-integer sentinel, `neginf` or `posinf`. Typed as `Int`; ghost
    /// code for extremal aggregations is its only intended producer.
    InfLit(bool),
    Var(String),
    Eq(Box<Expr>, Box<Expr>),
    Leq(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    ConstArray(Box<Expr>),
    Select(Box<Expr>, Box<Expr>),
    Store(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `nondet`; the type is resolved by the type checker from the assignment
    /// context when the parser could not determine it.
    Nondet(Option<TypeExpr>),
    Quant {
        kind: QuantKind,
        array: Box<Expr>,
        lo: Box<Expr>,
        hi: Box<Expr>,
        pred: LambdaPred,
    },
    Aggregate {
        agg: AggName,
        array: Box<Expr>,
        lo: Box<Expr>,
        hi: Box<Expr>,
        pred: Option<LambdaPred>,
    },
    MetaVar {
        name: String,
        kind: MetaKind,
    },
}

#[allow(clippy::should_implement_trait)] // AST constructors, not operator impls
impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn int(n: i64) -> Expr {
        Expr::IntLit(BigInt::from(n))
    }

    pub fn eq(l: Expr, r: Expr) -> Expr {
        Expr::Eq(Box::new(l), Box::new(r))
    }

    pub fn leq(l: Expr, r: Expr) -> Expr {
        Expr::Leq(Box::new(l), Box::new(r))
    }

    /// `l < r`, desugared to `!(r <= l)`.
    pub fn lt(l: Expr, r: Expr) -> Expr {
        Expr::not(Expr::leq(r, l))
    }

    /// `l > r`, desugared to `!(l <= r)`.
    pub fn gt(l: Expr, r: Expr) -> Expr {
        Expr::not(Expr::leq(l, r))
    }

    /// `l >= r`, desugared to `r <= l`.
    pub fn geq(l: Expr, r: Expr) -> Expr {
        Expr::leq(r, l)
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn and(l: Expr, r: Expr) -> Expr {
        Expr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Expr, r: Expr) -> Expr {
        Expr::Or(Box::new(l), Box::new(r))
    }

    pub fn add(l: Expr, r: Expr) -> Expr {
        Expr::Add(Box::new(l), Box::new(r))
    }

    pub fn sub(l: Expr, r: Expr) -> Expr {
        Expr::Sub(Box::new(l), Box::new(r))
    }

    pub fn mul(l: Expr, r: Expr) -> Expr {
        Expr::Mul(Box::new(l), Box::new(r))
    }

    pub fn div(l: Expr, r: Expr) -> Expr {
        Expr::Div(Box::new(l), Box::new(r))
    }

    pub fn ite(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::Ite(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn select(a: Expr, i: Expr) -> Expr {
        Expr::Select(Box::new(a), Box::new(i))
    }

    pub fn store(a: Expr, i: Expr, x: Expr) -> Expr {
        Expr::Store(Box::new(a), Box::new(i), Box::new(x))
    }

    pub fn const_array(fill: Expr) -> Expr {
        Expr::ConstArray(Box::new(fill))
    }

    pub fn meta(name: impl Into<String>) -> Expr {
        Expr::MetaVar {
            name: name.into(),
            kind: MetaKind::Expr,
        }
    }

    /// Left-associated conjunction of a nonempty list.
    pub fn and_all(parts: Vec<Expr>) -> Expr {
        let mut it = parts.into_iter();
        let first = it.next().expect("and_all on empty list");
        it.fold(first, Expr::and)
    }

    /// Left-associated disjunction of a nonempty list.
    pub fn or_all(parts: Vec<Expr>) -> Expr {
        let mut it = parts.into_iter();
        let first = it.next().expect("or_all on empty list");
        it.fold(first, Expr::or)
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::IntLit(_) | Expr::BoolLit(_) | Expr::InfLit(_))
    }

    /// Does `name` occur as a free variable? Lambda binders shadow.
    pub fn mentions_var(&self, name: &str) -> bool {
        match self {
            Expr::Var(v) => v == name,
            Expr::IntLit(_) | Expr::BoolLit(_) | Expr::InfLit(_) | Expr::Nondet(_) => false,
            Expr::MetaVar { .. } => false,
            Expr::Eq(l, r)
            | Expr::Leq(l, r)
            | Expr::And(l, r)
            | Expr::Or(l, r)
            | Expr::Add(l, r)
            | Expr::Sub(l, r)
            | Expr::Mul(l, r)
            | Expr::Div(l, r) => l.mentions_var(name) || r.mentions_var(name),
            Expr::Not(e) | Expr::ConstArray(e) => e.mentions_var(name),
            Expr::Ite(c, t, e) => {
                c.mentions_var(name) || t.mentions_var(name) || e.mentions_var(name)
            }
            Expr::Select(a, i) => a.mentions_var(name) || i.mentions_var(name),
            Expr::Store(a, i, x) => {
                a.mentions_var(name) || i.mentions_var(name) || x.mentions_var(name)
            }
            Expr::Quant {
                array,
                lo,
                hi,
                pred,
                ..
            } => {
                array.mentions_var(name)
                    || lo.mentions_var(name)
                    || hi.mentions_var(name)
                    || (pred.value_var != name
                        && pred.index_var != name
                        && pred.body.mentions_var(name))
            }
            Expr::Aggregate {
                array,
                lo,
                hi,
                pred,
                ..
            } => {
                array.mentions_var(name)
                    || lo.mentions_var(name)
                    || hi.mentions_var(name)
                    || pred.as_ref().is_some_and(|p| {
                        p.value_var != name && p.index_var != name && p.body.mentions_var(name)
                    })
            }
        }
    }

    /// Collect free variable names into `out`.
    pub fn free_vars(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::IntLit(_) | Expr::BoolLit(_) | Expr::InfLit(_) | Expr::Nondet(_) => {}
            Expr::MetaVar { .. } => {}
            Expr::Eq(l, r)
            | Expr::Leq(l, r)
            | Expr::And(l, r)
            | Expr::Or(l, r)
            | Expr::Add(l, r)
            | Expr::Sub(l, r)
            | Expr::Mul(l, r)
            | Expr::Div(l, r) => {
                l.free_vars(out);
                r.free_vars(out);
            }
            Expr::Not(e) | Expr::ConstArray(e) => e.free_vars(out),
            Expr::Ite(c, t, e) => {
                c.free_vars(out);
                t.free_vars(out);
                e.free_vars(out);
            }
            Expr::Select(a, i) => {
                a.free_vars(out);
                i.free_vars(out);
            }
            Expr::Store(a, i, x) => {
                a.free_vars(out);
                i.free_vars(out);
                x.free_vars(out);
            }
            Expr::Quant {
                array,
                lo,
                hi,
                pred,
                ..
            } => {
                array.free_vars(out);
                lo.free_vars(out);
                hi.free_vars(out);
                let mut inner = std::collections::BTreeSet::new();
                pred.body.free_vars(&mut inner);
                inner.remove(&pred.value_var);
                inner.remove(&pred.index_var);
                out.extend(inner);
            }
            Expr::Aggregate {
                array,
                lo,
                hi,
                pred,
                ..
            } => {
                array.free_vars(out);
                lo.free_vars(out);
                hi.free_vars(out);
                if let Some(p) = pred {
                    let mut inner = std::collections::BTreeSet::new();
                    p.body.free_vars(&mut inner);
                    inner.remove(&p.value_var);
                    inner.remove(&p.index_var);
                    out.extend(inner);
                }
            }
        }
    }

    /// Does the expression contain a `Quant` or `Aggregate` node?
    pub fn has_aggregate(&self) -> bool {
        match self {
            Expr::Quant { .. } | Expr::Aggregate { .. } => true,
            Expr::IntLit(_)
            | Expr::BoolLit(_)
            | Expr::InfLit(_)
            | Expr::Var(_)
            | Expr::Nondet(_)
            | Expr::MetaVar { .. } => false,
            Expr::Eq(l, r)
            | Expr::Leq(l, r)
            | Expr::And(l, r)
            | Expr::Or(l, r)
            | Expr::Add(l, r)
            | Expr::Sub(l, r)
            | Expr::Mul(l, r)
            | Expr::Div(l, r) => l.has_aggregate() || r.has_aggregate(),
            Expr::Not(e) | Expr::ConstArray(e) => e.has_aggregate(),
            Expr::Ite(c, t, e) => c.has_aggregate() || t.has_aggregate() || e.has_aggregate(),
            Expr::Select(a, i) => a.has_aggregate() || i.has_aggregate(),
            Expr::Store(a, i, x) => {
                a.has_aggregate() || i.has_aggregate() || x.has_aggregate()
            }
        }
    }
}

/// Visit the direct subexpressions of an expression (lambda bodies
/// included).
pub fn visit_children<'a>(e: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
    match e {
        Expr::IntLit(_)
        | Expr::BoolLit(_)
        | Expr::InfLit(_)
        | Expr::Var(_)
        | Expr::Nondet(_)
        | Expr::MetaVar { .. } => {}
        Expr::Eq(l, r)
        | Expr::Leq(l, r)
        | Expr::And(l, r)
        | Expr::Or(l, r)
        | Expr::Add(l, r)
        | Expr::Sub(l, r)
        | Expr::Mul(l, r)
        | Expr::Div(l, r) => {
            f(l);
            f(r);
        }
        Expr::Not(x) | Expr::ConstArray(x) => f(x),
        Expr::Ite(c, t, e2) => {
            f(c);
            f(t);
            f(e2);
        }
        Expr::Select(a, i) => {
            f(a);
            f(i);
        }
        Expr::Store(a, i, x) => {
            f(a);
            f(i);
            f(x);
        }
        Expr::Quant {
            array,
            lo,
            hi,
            pred,
            ..
        } => {
            f(array);
            f(lo);
            f(hi);
            f(&pred.body);
        }
        Expr::Aggregate {
            array,
            lo,
            hi,
            pred,
            ..
        } => {
            f(array);
            f(lo);
            f(hi);
            if let Some(p) = pred {
                f(&p.body);
            }
        }
    }
}

/// Capture-naive substitution of free variables; lambda binders shadow.
/// Ghost templates never rebind substituted names, which keeps this safe.
pub fn subst_vars(e: &Expr, map: &BTreeMap<String, Expr>) -> Expr {
    let go = |e: &Expr| subst_vars(e, map);
    match e {
        Expr::Var(v) => map.get(v).cloned().unwrap_or_else(|| e.clone()),
        Expr::IntLit(_) | Expr::BoolLit(_) | Expr::InfLit(_) | Expr::Nondet(_) => e.clone(),
        Expr::MetaVar { .. } => e.clone(),
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
        } => {
            let mut inner = map.clone();
            inner.remove(&pred.value_var);
            inner.remove(&pred.index_var);
            Expr::Quant {
                kind: *kind,
                array: Box::new(go(array)),
                lo: Box::new(go(lo)),
                hi: Box::new(go(hi)),
                pred: LambdaPred {
                    value_var: pred.value_var.clone(),
                    index_var: pred.index_var.clone(),
                    body: Box::new(subst_vars(&pred.body, &inner)),
                },
            }
        }
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
            pred: pred.as_ref().map(|p| {
                let mut inner = map.clone();
                inner.remove(&p.value_var);
                inner.remove(&p.index_var);
                LambdaPred {
                    value_var: p.value_var.clone(),
                    index_var: p.index_var.clone(),
                    body: Box::new(subst_vars(&p.body, &inner)),
                }
            }),
        },
    }
}

/// Statement body; every statement carries its control point id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StmtKind {
    Skip,
    /// `Type name = rhs;` or `Type name;` (default-initialized).
    Decl {
        name: String,
        ty: TypeExpr,
        rhs: Option<Expr>,
    },
    Assign {
        lhs: String,
        rhs: Expr,
    },
    /// Statement sequencing. The paper's binary `Prog; Prog` is realized
    /// n-ary so splicing rewritten statements keeps a canonical shape.
    Block(Vec<Stmt>),
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Box<Stmt>,
    },
    Assert(Expr),
    Assume(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stmt {
    pub id: ControlPointId,
    pub kind: StmtKind,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt {
            id: ControlPointId::default(),
            kind,
        }
    }

    pub fn skip() -> Stmt {
        Stmt::new(StmtKind::Skip)
    }

    pub fn assign(lhs: impl Into<String>, rhs: Expr) -> Stmt {
        Stmt::new(StmtKind::Assign {
            lhs: lhs.into(),
            rhs,
        })
    }

    pub fn decl(name: impl Into<String>, ty: TypeExpr, rhs: Option<Expr>) -> Stmt {
        Stmt::new(StmtKind::Decl {
            name: name.into(),
            ty,
            rhs,
        })
    }

    pub fn block(stmts: Vec<Stmt>) -> Stmt {
        Stmt::new(StmtKind::Block(stmts))
    }

    pub fn while_loop(cond: Expr, body: Stmt) -> Stmt {
        Stmt::new(StmtKind::While {
            cond,
            body: Box::new(body),
        })
    }

    pub fn if_else(cond: Expr, then_branch: Stmt, else_branch: Stmt) -> Stmt {
        Stmt::new(StmtKind::If {
            cond,
            then_branch: Box::new(then_branch),
            else_branch: Box::new(else_branch),
        })
    }

    pub fn assert(e: Expr) -> Stmt {
        Stmt::new(StmtKind::Assert(e))
    }

    pub fn assume(e: Expr) -> Stmt {
        Stmt::new(StmtKind::Assume(e))
    }

    /// The assigned variable and right-hand side when this statement is an
    /// assignment-like statement (plain assignment or initialized decl).
    pub fn as_assignment(&self) -> Option<(&str, &Expr)> {
        match &self.kind {
            StmtKind::Assign { lhs, rhs } => Some((lhs, rhs)),
            StmtKind::Decl {
                name,
                rhs: Some(rhs),
                ..
            } => Some((name, rhs)),
            _ => None,
        }
    }

    /// Visit every statement in the subtree, pre-order.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::Block(ss) => {
                for s in ss {
                    s.visit(f);
                }
            }
            StmtKind::While { body, .. } => body.visit(f),
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.visit(f);
                else_branch.visit(f);
            }
            _ => {}
        }
    }

    /// Visit every expression occurring in the subtree.
    pub fn visit_exprs<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        self.visit(&mut |s| match &s.kind {
            StmtKind::Decl { rhs: Some(e), .. }
            | StmtKind::Assign { rhs: e, .. }
            | StmtKind::Assert(e)
            | StmtKind::Assume(e)
            | StmtKind::While { cond: e, .. }
            | StmtKind::If { cond: e, .. } => f(e),
            _ => {}
        });
    }
}

/// A program: a typed vocabulary plus the statement body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    /// The vocabulary of typed program variables.
    pub vocab: BTreeMap<String, TypeExpr>,
    pub body: Stmt,
}

impl Program {
    pub fn new(vocab: BTreeMap<String, TypeExpr>, body: Stmt) -> Program {
        Program { vocab, body }
    }

    /// Reassign dense pre-order control point ids; returns the next free id.
    pub fn renumber(&mut self) -> u32 {
        let mut next = 0u32;
        renumber_stmt(&mut self.body, &mut next);
        next
    }

    /// Largest assigned id plus one.
    pub fn max_point(&self) -> u32 {
        let mut max = 0;
        self.body.visit(&mut |s| max = max.max(s.id.0 + 1));
        max
    }

    /// All statements satisfying a predicate, pre-order.
    pub fn stmts_where(&self, mut pred: impl FnMut(&Stmt) -> bool) -> Vec<&Stmt> {
        let mut out = Vec::new();
        self.body.visit(&mut |s| {
            if pred(s) {
                out.push(s);
            }
        });
        out
    }

    pub fn find_stmt(&self, id: ControlPointId) -> Option<&Stmt> {
        let mut found = None;
        self.body.visit(&mut |s| {
            if s.id == id && found.is_none() {
                found = Some(s);
            }
        });
        found
    }

    /// Does the program contain any quantifier or aggregation expression
    /// (i.e., is it outside the aggregate-free class)?
    pub fn has_aggregates(&self) -> bool {
        let mut found = false;
        self.body.visit_exprs(&mut |e| found = found || e.has_aggregate());
        found
    }
}

fn renumber_stmt(s: &mut Stmt, next: &mut u32) {
    s.id = ControlPointId(*next);
    *next += 1;
    match &mut s.kind {
        StmtKind::Block(ss) => {
            for s in ss {
                renumber_stmt(s, next);
            }
        }
        StmtKind::While { body, .. } => renumber_stmt(body, next),
        StmtKind::If {
            then_branch,
            else_branch,
            ..
        } => {
            renumber_stmt(then_branch, next);
            renumber_stmt(else_branch, next);
        }
        _ => {}
    }
}

/// Generates names that are fresh with respect to a set of taken names.
/// Generated names use a `$k` suffix; the surface language reserves `$` and
/// `'` for generated code.
#[derive(Debug, Clone, Default)]
pub struct FreshNamer {
    taken: std::collections::BTreeSet<String>,
    counter: u32,
}

impl FreshNamer {
    pub fn new() -> FreshNamer {
        FreshNamer::default()
    }

    pub fn for_program(p: &Program) -> FreshNamer {
        let mut n = FreshNamer::new();
        for name in p.vocab.keys() {
            n.reserve(name);
        }
        n
    }

    pub fn reserve(&mut self, name: &str) {
        self.taken.insert(name.to_string());
    }

    pub fn is_taken(&self, name: &str) -> bool {
        self.taken.contains(name)
    }

    pub fn fresh(&mut self, base: &str) -> String {
        loop {
            self.counter += 1;
            let candidate = format!("{base}${}", self.counter);
            if !self.taken.contains(&candidate) {
                self.taken.insert(candidate.clone());
                return candidate;
            }
        }
    }
}

/// Heuristic used by structural equivalence: names introduced by
/// instrumentation carry a `$k` suffix (ours) or a prime (hand-written
/// reference listings).
pub fn is_generated_name(name: &str) -> bool {
    name.contains('$') || name.ends_with('\'')
}
