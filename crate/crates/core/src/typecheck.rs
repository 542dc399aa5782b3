//! Type checker. On success every `nondet` has its type resolved and the
//! program is wrapped as a `TypedProgram`.
//!
//! Scoping is flat: a name is declared at most once and must be declared
//! before use (in pre-order). `neginf`/`posinf` are typed `Int`; they are the
//! extended-integer sentinels used by ghost code for extremal aggregations.

use std::collections::BTreeMap;

use crate::ast::*;
use crate::error::TypeError;
use crate::pretty::{pretty_expr, pretty_stmt};

/// A program that passed the type checker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedProgram {
    program: Program,
}

impl TypedProgram {
    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn into_program(self) -> Program {
        self.program
    }
}

/// Check a program; on success, `nondet` nodes carry their resolved types.
pub fn typecheck(p: &Program) -> Result<TypedProgram, Vec<TypeError>> {
    let mut cx = Checker {
        vocab: BTreeMap::new(),
        errors: Vec::new(),
    };
    let mut program = p.clone();
    cx.check_stmt(&mut program.body);
    // Names assigned but never declared.
    program.body.visit(&mut |s| {
        if let StmtKind::Assign { lhs, .. } = &s.kind {
            if !cx.vocab.contains_key(lhs) {
                cx.errors.push(TypeError {
                    point: s.id,
                    expected: "a declared variable".into(),
                    found: format!("undeclared `{lhs}`"),
                    context: pretty_stmt(s).trim().to_string(),
                });
            }
        }
    });
    if cx.errors.is_empty() {
        // The declared vocabulary is authoritative after checking.
        program.vocab = cx.vocab;
        Ok(TypedProgram { program })
    } else {
        Err(cx.errors)
    }
}

/// Infer the type of a closed-scope expression against a vocabulary.
pub fn type_of_expr(
    e: &Expr,
    vocab: &BTreeMap<String, TypeExpr>,
) -> Result<TypeExpr, TypeError> {
    let mut cx = Checker {
        vocab: vocab.clone(),
        errors: Vec::new(),
    };
    let mut e = e.clone();
    match cx.infer(&mut e, ControlPointId::default()) {
        Some(t) if cx.errors.is_empty() => Ok(t),
        _ => Err(cx
            .errors
            .into_iter()
            .next()
            .unwrap_or_else(|| TypeError {
                point: ControlPointId::default(),
                expected: "a typeable expression".into(),
                found: "untypeable".into(),
                context: pretty_expr(&e),
            })),
    }
}

struct Checker {
    vocab: BTreeMap<String, TypeExpr>,
    errors: Vec<TypeError>,
}

impl Checker {
    fn error(&mut self, point: ControlPointId, expected: &str, found: &str, ctx: &Expr) {
        self.errors.push(TypeError {
            point,
            expected: expected.to_string(),
            found: found.to_string(),
            context: pretty_expr(ctx),
        });
    }

    fn check_stmt(&mut self, s: &mut Stmt) {
        let point = s.id;
        match &mut s.kind {
            StmtKind::Skip => {}
            StmtKind::Block(ss) => {
                for inner in ss {
                    self.check_stmt(inner);
                }
            }
            StmtKind::Decl { name, ty, rhs } => {
                if self.vocab.contains_key(name.as_str()) {
                    self.errors.push(TypeError {
                        point,
                        expected: "a fresh variable name".into(),
                        found: format!("redeclaration of `{name}`"),
                        context: name.clone(),
                    });
                }
                if let Some(rhs) = rhs {
                    self.check_expect(rhs, ty.clone(), point);
                }
                self.vocab.insert(name.clone(), ty.clone());
            }
            StmtKind::Assign { lhs, rhs } => {
                if let Some(ty) = self.vocab.get(lhs.as_str()).cloned() {
                    self.check_expect(rhs, ty, point);
                } else {
                    // Reported at the end of typecheck; still try to infer to
                    // surface nested errors.
                    self.infer(rhs, point);
                }
            }
            StmtKind::While { cond, body } => {
                self.check_expect(cond, TypeExpr::Bool, point);
                self.check_stmt(body);
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.check_expect(cond, TypeExpr::Bool, point);
                self.check_stmt(then_branch);
                self.check_stmt(else_branch);
            }
            StmtKind::Assert(e) | StmtKind::Assume(e) => {
                self.check_expect(e, TypeExpr::Bool, point);
            }
        }
    }

    fn check_expect(&mut self, e: &mut Expr, expected: TypeExpr, point: ControlPointId) {
        if let Expr::Nondet(slot) = e {
            match slot {
                Some(t) if *t != expected => {
                    let t = t.clone();
                    self.error(point, &expected.to_string(), &t.to_string(), e);
                }
                _ => *slot = Some(expected),
            }
            return;
        }
        if let Some(found) = self.infer(e, point) {
            if found != expected {
                self.error(point, &expected.to_string(), &found.to_string(), e);
            }
        }
    }

    /// Infer a type; pushes errors and returns None when untypeable.
    fn infer(&mut self, e: &mut Expr, point: ControlPointId) -> Option<TypeExpr> {
        match e {
            Expr::IntLit(_) | Expr::InfLit(_) => Some(TypeExpr::Int),
            Expr::BoolLit(_) => Some(TypeExpr::Bool),
            Expr::Var(v) => {
                if let Some(t) = self.vocab.get(v.as_str()) {
                    Some(t.clone())
                } else {
                    self.error(point, "a declared variable", &format!("undeclared `{v}`"), e);
                    None
                }
            }
            Expr::Nondet(Some(t)) => Some(t.clone()),
            Expr::Nondet(None) => {
                self.error(
                    point,
                    "a context that determines the type of `nondet`",
                    "nondet outside an assignment right-hand side",
                    e,
                );
                None
            }
            Expr::MetaVar { .. } => {
                self.error(point, "a program expression", "meta-variable", e);
                None
            }
            Expr::Eq(l, r) => {
                let lt = self.infer(l, point)?;
                let rt = self.infer(r, point)?;
                if lt != rt {
                    let msg = format!("{lt} == {rt}");
                    self.error(point, "operands of equal type", &msg, e);
                    return None;
                }
                Some(TypeExpr::Bool)
            }
            Expr::Leq(l, r) => {
                self.require(l, TypeExpr::Int, point);
                self.require(r, TypeExpr::Int, point);
                Some(TypeExpr::Bool)
            }
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) => {
                self.require(l, TypeExpr::Int, point);
                self.require(r, TypeExpr::Int, point);
                Some(TypeExpr::Int)
            }
            Expr::Not(x) => {
                self.require(x, TypeExpr::Bool, point);
                Some(TypeExpr::Bool)
            }
            Expr::And(l, r) | Expr::Or(l, r) => {
                self.require(l, TypeExpr::Bool, point);
                self.require(r, TypeExpr::Bool, point);
                Some(TypeExpr::Bool)
            }
            Expr::Ite(c, t, f) => {
                self.require(c, TypeExpr::Bool, point);
                let tt = self.infer(t, point)?;
                let ft = self.infer(f, point)?;
                if tt != ft {
                    let msg = format!("branches of type {tt} and {ft}");
                    self.error(point, "ite branches of equal type", &msg, e);
                    return None;
                }
                Some(tt)
            }
            Expr::ConstArray(x) => {
                let t = self.infer(x, point)?;
                Some(TypeExpr::array(t))
            }
            Expr::Select(a, i) => {
                let at = self.infer(a, point)?;
                self.require(i, TypeExpr::Int, point);
                match at {
                    TypeExpr::Array(elem) => Some(*elem),
                    other => {
                        self.error(point, "Array _", &other.to_string(), e);
                        None
                    }
                }
            }
            Expr::Store(a, i, x) => {
                let at = self.infer(a, point)?;
                self.require(i, TypeExpr::Int, point);
                match at {
                    TypeExpr::Array(elem) => {
                        self.require(x, (*elem).clone(), point);
                        Some(TypeExpr::Array(elem))
                    }
                    other => {
                        self.error(point, "Array _", &other.to_string(), e);
                        None
                    }
                }
            }
            Expr::Quant {
                array,
                lo,
                hi,
                pred,
                ..
            } => {
                let elem = self.check_interval(array, lo, hi, point)?;
                self.check_pred(pred, elem, point);
                Some(TypeExpr::Bool)
            }
            Expr::Aggregate {
                agg,
                array,
                lo,
                hi,
                pred,
            } => {
                let elem = self.check_interval(array, lo, hi, point)?;
                match agg {
                    AggName::Sum | AggName::Min | AggName::Max | AggName::Product => {
                        if elem != TypeExpr::Int {
                            let kw = agg.keyword().to_string();
                            self.error(
                                point,
                                "Array Int",
                                &format!("Array {elem} under {kw}"),
                                e,
                            );
                        }
                        Some(TypeExpr::Int)
                    }
                    AggName::Numof => {
                        if let Some(p) = pred {
                            self.check_pred(p, elem, point);
                        }
                        Some(TypeExpr::Int)
                    }
                }
            }
        }
    }

    fn require(&mut self, e: &mut Expr, expected: TypeExpr, point: ControlPointId) {
        self.check_expect(e, expected, point)
    }

    fn check_interval(
        &mut self,
        array: &mut Expr,
        lo: &mut Expr,
        hi: &mut Expr,
        point: ControlPointId,
    ) -> Option<TypeExpr> {
        self.require(lo, TypeExpr::Int, point);
        self.require(hi, TypeExpr::Int, point);
        let at = self.infer(array, point)?;
        match at {
            TypeExpr::Array(elem) => Some(*elem),
            other => {
                self.error(point, "Array _", &other.to_string(), array);
                None
            }
        }
    }

    fn check_pred(&mut self, pred: &mut LambdaPred, elem: TypeExpr, point: ControlPointId) {
        let shadow_value = self.vocab.insert(pred.value_var.clone(), elem);
        let shadow_index = self.vocab.insert(pred.index_var.clone(), TypeExpr::Int);
        self.check_expect(&mut pred.body, TypeExpr::Bool, point);
        match shadow_value {
            Some(t) => {
                self.vocab.insert(pred.value_var.clone(), t);
            }
            None => {
                self.vocab.remove(&pred.value_var);
            }
        }
        match shadow_index {
            Some(t) => {
                self.vocab.insert(pred.index_var.clone(), t);
            }
            None => {
                self.vocab.remove(&pred.index_var);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse, parse_expr};

    fn check_src(src: &str) -> Result<TypedProgram, Vec<TypeError>> {
        typecheck(&parse(src).unwrap())
    }

    fn expr_type(src: &str, vocab: &[(&str, TypeExpr)]) -> Result<TypeExpr, TypeError> {
        let vocab: BTreeMap<String, TypeExpr> = vocab
            .iter()
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect();
        type_of_expr(&parse_expr(src).unwrap(), &vocab)
    }

    #[test]
    fn store_over_const_is_array_int() {
        assert_eq!(
            expr_type("store(const(0), 1, 2)", &[]).unwrap(),
            TypeExpr::array(TypeExpr::Int)
        );
    }

    #[test]
    fn select_index_must_be_int() {
        assert!(expr_type("select(const(0), true)", &[]).is_err());
    }

    #[test]
    fn rule_fixtures_positive_and_negative() {
        // One positive and one negative case per typing rule.
        let int_var = [("x", TypeExpr::Int)];
        let bool_var = [("p", TypeExpr::Bool)];
        let arr = [("a", TypeExpr::array(TypeExpr::Int))];

        assert_eq!(expr_type("42", &[]).unwrap(), TypeExpr::Int);
        assert!(expr_type("select(42, 0)", &[]).is_err());

        assert_eq!(expr_type("true", &[]).unwrap(), TypeExpr::Bool);
        assert_eq!(expr_type("false", &[]).unwrap(), TypeExpr::Bool);
        assert!(expr_type("true + 1", &[]).is_err());

        assert_eq!(expr_type("x", &int_var).unwrap(), TypeExpr::Int);
        assert!(expr_type("y", &int_var).is_err());

        assert_eq!(expr_type("x == 1", &int_var).unwrap(), TypeExpr::Bool);
        assert!(expr_type("x == true", &int_var).is_err());

        assert_eq!(expr_type("x <= 1", &int_var).unwrap(), TypeExpr::Bool);
        assert!(expr_type("true <= 1", &[]).is_err());

        assert_eq!(expr_type("x + 1", &int_var).unwrap(), TypeExpr::Int);
        assert!(expr_type("x + true", &int_var).is_err());

        assert_eq!(expr_type("x * 2", &int_var).unwrap(), TypeExpr::Int);
        assert!(expr_type("p * 2", &bool_var).is_err());

        assert_eq!(expr_type("x / 2", &int_var).unwrap(), TypeExpr::Int);
        assert!(expr_type("p / 2", &bool_var).is_err());

        assert_eq!(expr_type("x - 1", &int_var).unwrap(), TypeExpr::Int);
        assert!(expr_type("p - 1", &bool_var).is_err());

        assert_eq!(expr_type("!p", &bool_var).unwrap(), TypeExpr::Bool);
        assert!(expr_type("!x", &int_var).is_err());

        assert_eq!(expr_type("p && p", &bool_var).unwrap(), TypeExpr::Bool);
        assert!(expr_type("p && x", &[("p", TypeExpr::Bool), ("x", TypeExpr::Int)]).is_err());

        assert_eq!(expr_type("p || p", &bool_var).unwrap(), TypeExpr::Bool);
        assert!(expr_type("x || p", &[("p", TypeExpr::Bool), ("x", TypeExpr::Int)]).is_err());

        assert_eq!(
            expr_type("const(true)", &[]).unwrap(),
            TypeExpr::array(TypeExpr::Bool)
        );
        assert!(expr_type("const(y)", &[]).is_err());

        assert_eq!(expr_type("select(a, 0)", &arr).unwrap(), TypeExpr::Int);
        assert!(expr_type("select(a, true)", &arr).is_err());

        assert_eq!(
            expr_type("store(a, 0, 1)", &arr).unwrap(),
            TypeExpr::array(TypeExpr::Int)
        );
        assert!(expr_type("store(a, 0, true)", &arr).is_err());

        // Extensions.
        assert_eq!(expr_type("ite(p, 1, 2)", &bool_var).unwrap(), TypeExpr::Int);
        assert!(expr_type("ite(p, 1, true)", &bool_var).is_err());

        assert_eq!(expr_type("neginf", &[]).unwrap(), TypeExpr::Int);
        assert_eq!(expr_type("posinf", &[]).unwrap(), TypeExpr::Int);

        assert_eq!(
            expr_type("\\forall(a, 0, 3, \\lambda(x, i). x == i)", &arr).unwrap(),
            TypeExpr::Bool
        );
        assert!(expr_type("\\forall(a, 0, 3, \\lambda(x, i). x + i)", &arr).is_err());

        assert_eq!(expr_type("\\sum(a, 0, 3)", &arr).unwrap(), TypeExpr::Int);
        assert!(expr_type("\\sum(x, 0, 3)", &int_var).is_err());

        assert_eq!(
            expr_type("\\numof(a, 0, 3, \\lambda(x, i). x == i)", &arr).unwrap(),
            TypeExpr::Int
        );
        assert!(expr_type("\\numof(a, 0, true, \\lambda(x, i). x == i)", &arr).is_err());
    }

    #[test]
    fn program_checks() {
        assert!(check_src("Int x = 1; assert(x == 1);").is_ok());
        assert!(check_src("Int x = true;").is_err());
        assert!(check_src("x = 1;").is_err(), "assignment without decl");
        assert!(check_src("Int x = 1; Int x = 2;").is_err(), "redeclaration");
        assert!(check_src("Int x = 1; assert(x);").is_err());
    }

    #[test]
    fn nondet_resolved_from_assign_context() {
        let tp = check_src("Array Int a = const(0); a = nondet;").unwrap();
        let mut found = None;
        tp.program().body.visit_exprs(&mut |e| {
            if let Expr::Nondet(t) = e {
                found = t.clone();
            }
        });
        assert_eq!(found, Some(TypeExpr::array(TypeExpr::Int)));
    }

    #[test]
    fn uninitialized_decl_allowed() {
        assert!(check_src("Bool b; b = true; assert(b);").is_ok());
    }
}
