//! Concrete evaluator under the extended execution model: a failing `assert`
//! aborts the run, a false `assume` blocks it (the finite stand-in for
//! nontermination), and a step budget bounds loops.
//!
//! Traces record a snapshot after every executed simple statement, after each
//! completed `if`, and before every loop condition evaluation.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use thiserror::Error;

use crate::ast::*;
use crate::monoid::{self, AggregatorSpec, Carrier};
use crate::value::{FunArray, State, Value};

/// Aggregation intervals above this width are refused by the brute-force
/// evaluator; desk-scale programs stay far below it.
const MAX_AGG_WIDTH: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalErrorKind {
    #[error("division by zero")]
    DivByZero,
    #[error("undeclared variable `{0}`")]
    UndeclaredVar(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("arithmetic on an infinite value")]
    InfArithmetic,
    #[error("infinite value used as array index or bound")]
    InfIndex,
    #[error("scripted nondet source exhausted")]
    NondetExhausted,
    #[error("nondet of type {0} not supported by this source")]
    UnsupportedNondet(String),
    #[error("aggregation interval too large")]
    AggregateTooLarge,
    #[error("meta-variable in executable code")]
    MetaVar,
}

/// Source of nondeterministic values. Draws are keyed by the control point
/// of the statement containing the `nondet` expression.
pub trait Nondet {
    fn draw(&mut self, ty: &TypeExpr, site: ControlPointId) -> Result<Value, EvalErrorKind>;
}

/// The standard sources: a fixed script, or seeded pseudo-random draws from
/// an interval. Exhaustive interval enumeration is built on top of `Nondet`
/// by the bounded oracle.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum NondetSource {
    Scripted { values: Vec<Value>, next: usize },
    Seeded { rng: StdRng, lo: i64, hi: i64 },
}

impl NondetSource {
    pub fn scripted(values: Vec<Value>) -> NondetSource {
        NondetSource::Scripted { values, next: 0 }
    }

    pub fn scripted_ints(values: &[i64]) -> NondetSource {
        NondetSource::scripted(values.iter().map(|&n| Value::int(n)).collect())
    }

    pub fn seeded(seed: u64, lo: i64, hi: i64) -> NondetSource {
        NondetSource::Seeded {
            rng: StdRng::seed_from_u64(seed),
            lo,
            hi,
        }
    }
}

impl Nondet for NondetSource {
    fn draw(&mut self, ty: &TypeExpr, _site: ControlPointId) -> Result<Value, EvalErrorKind> {
        match self {
            NondetSource::Scripted { values, next } => {
                let v = values.get(*next).cloned().ok_or(EvalErrorKind::NondetExhausted)?;
                *next += 1;
                Ok(v)
            }
            NondetSource::Seeded { rng, lo, hi } => match ty {
                TypeExpr::Int => Ok(Value::int(rng.gen_range(*lo..=*hi))),
                TypeExpr::Bool => Ok(Value::Bool(rng.gen())),
                TypeExpr::Array(_) => {
                    Err(EvalErrorKind::UnsupportedNondet(ty.to_string()))
                }
            },
        }
    }
}

/// One recorded trace step: the state after executing the statement at
/// `point` (for loop heads: before evaluating the condition).
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub point: ControlPointId,
    pub state: State,
}

pub type Trace = Vec<TraceStep>;

/// Serialize a trace as JSON Lines: `{"step":k,"point":id,"vars":{...}}`.
pub fn trace_to_jsonl(trace: &Trace) -> String {
    let mut out = String::new();
    for (k, step) in trace.iter().enumerate() {
        let line = serde_json::json!({
            "step": k,
            "point": step.point.0,
            "vars": step.state,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunOutcome {
    Terminated(State),
    AssertFailed { point: ControlPointId },
    Blocked { point: ControlPointId },
    BudgetExceeded,
    RuntimeError { kind: EvalErrorKind, point: ControlPointId },
}

impl RunOutcome {
    pub fn is_assert_failure(&self) -> bool {
        matches!(self, RunOutcome::AssertFailed { .. })
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: RunOutcome,
    /// Populated when recording was requested; ends at the failing point for
    /// assertion failures.
    pub trace: Trace,
    pub steps_used: u64,
}

/// Execute a program. Declared-but-uninitialized variables start at the type
/// default; `budget` bounds the number of executed statements.
pub fn run(p: &Program, nd: &mut dyn Nondet, budget: u64, record: bool) -> RunResult {
    run_in_state(&p.body, State::new(), nd, budget, record)
}

/// Execute a statement from a given pre-state.
pub fn run_in_state(
    body: &Stmt,
    mut state: State,
    nd: &mut dyn Nondet,
    budget: u64,
    record: bool,
) -> RunResult {
    let mut exec = Exec {
        nd,
        budget,
        used: 0,
        record,
        trace: Vec::new(),
    };
    let outcome = match exec.stmt(body, &mut state) {
        Ok(Flow::Normal) => RunOutcome::Terminated(state),
        Ok(Flow::Stop(stop)) => stop,
        Err((kind, point)) => RunOutcome::RuntimeError { kind, point },
    };
    RunResult {
        outcome,
        trace: exec.trace,
        steps_used: exec.used,
    }
}

enum Flow {
    Normal,
    Stop(RunOutcome),
}

struct Exec<'a> {
    nd: &'a mut dyn Nondet,
    budget: u64,
    used: u64,
    record: bool,
    trace: Trace,
}

type EvalResult<T> = Result<T, (EvalErrorKind, ControlPointId)>;

impl<'a> Exec<'a> {
    fn snapshot(&mut self, point: ControlPointId, state: &State) {
        if self.record {
            self.trace.push(TraceStep {
                point,
                state: state.clone(),
            });
        }
    }

    fn tick(&mut self) -> Option<Flow> {
        self.used += 1;
        if self.used > self.budget {
            Some(Flow::Stop(RunOutcome::BudgetExceeded))
        } else {
            None
        }
    }

    fn stmt(&mut self, s: &Stmt, state: &mut State) -> EvalResult<Flow> {
        match &s.kind {
            StmtKind::Block(ss) => {
                for inner in ss {
                    match self.stmt(inner, state)? {
                        Flow::Normal => {}
                        stop => return Ok(stop),
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::Skip => {
                if let Some(stop) = self.tick() {
                    return Ok(stop);
                }
                self.snapshot(s.id, state);
                Ok(Flow::Normal)
            }
            StmtKind::Decl { name, ty, rhs } => {
                if let Some(stop) = self.tick() {
                    return Ok(stop);
                }
                let value = match rhs {
                    Some(e) => self.expr(e, state, s.id)?,
                    None => Value::default_of(ty),
                };
                state.set(name.clone(), value);
                self.snapshot(s.id, state);
                Ok(Flow::Normal)
            }
            StmtKind::Assign { lhs, rhs } => {
                if let Some(stop) = self.tick() {
                    return Ok(stop);
                }
                let value = self.expr(rhs, state, s.id)?;
                state.set(lhs.clone(), value);
                self.snapshot(s.id, state);
                Ok(Flow::Normal)
            }
            StmtKind::Assert(e) => {
                if let Some(stop) = self.tick() {
                    return Ok(stop);
                }
                let v = self.expr(e, state, s.id)?;
                self.snapshot(s.id, state);
                match v {
                    Value::Bool(true) => Ok(Flow::Normal),
                    Value::Bool(false) => Ok(Flow::Stop(RunOutcome::AssertFailed { point: s.id })),
                    other => Err((
                        EvalErrorKind::TypeMismatch(format!("assert on {other}")),
                        s.id,
                    )),
                }
            }
            StmtKind::Assume(e) => {
                if let Some(stop) = self.tick() {
                    return Ok(stop);
                }
                let v = self.expr(e, state, s.id)?;
                self.snapshot(s.id, state);
                match v {
                    Value::Bool(true) => Ok(Flow::Normal),
                    Value::Bool(false) => Ok(Flow::Stop(RunOutcome::Blocked { point: s.id })),
                    other => Err((
                        EvalErrorKind::TypeMismatch(format!("assume on {other}")),
                        s.id,
                    )),
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                if let Some(stop) = self.tick() {
                    return Ok(stop);
                }
                let v = self.expr(cond, state, s.id)?;
                let taken = match v {
                    Value::Bool(b) => b,
                    other => {
                        return Err((
                            EvalErrorKind::TypeMismatch(format!("if condition {other}")),
                            s.id,
                        ))
                    }
                };
                let branch = if taken { then_branch } else { else_branch };
                match self.stmt(branch, state)? {
                    Flow::Normal => {
                        self.snapshot(s.id, state);
                        Ok(Flow::Normal)
                    }
                    stop => Ok(stop),
                }
            }
            StmtKind::While { cond, body } => loop {
                if let Some(stop) = self.tick() {
                    return Ok(stop);
                }
                self.snapshot(s.id, state);
                let v = self.expr(cond, state, s.id)?;
                match v {
                    Value::Bool(true) => match self.stmt(body, state)? {
                        Flow::Normal => {}
                        stop => return Ok(stop),
                    },
                    Value::Bool(false) => return Ok(Flow::Normal),
                    other => {
                        return Err((
                            EvalErrorKind::TypeMismatch(format!("while condition {other}")),
                            s.id,
                        ))
                    }
                }
            },
        }
    }

    fn expr(&mut self, e: &Expr, s: &State, point: ControlPointId) -> EvalResult<Value> {
        eval_expr_inner(e, s, Some(self), point).map_err(|k| (k, point))
    }
}

/// Evaluate a (nondet-free) expression in a state.
pub fn eval_expr_pure(e: &Expr, s: &State) -> Result<Value, EvalErrorKind> {
    eval_expr_inner(e, s, None, ControlPointId::default())
}

/// Evaluate an expression, drawing nondet values from `nd`.
pub fn eval_expr(
    e: &Expr,
    s: &State,
    nd: &mut dyn Nondet,
    point: ControlPointId,
) -> Result<Value, EvalErrorKind> {
    let mut exec = Exec {
        nd,
        budget: u64::MAX,
        used: 0,
        record: false,
        trace: Vec::new(),
    };
    eval_expr_inner(e, s, Some(&mut exec), point)
}

/// Evaluate a lambda predicate at a concrete (value, index) pair.
pub fn eval_pred_at(
    pred: &LambdaPred,
    x: &Value,
    i: &BigInt,
    s: &State,
) -> Result<bool, EvalErrorKind> {
    let mut scope = s.clone();
    scope.set(pred.value_var.clone(), x.clone());
    scope.set(pred.index_var.clone(), Value::Int(i.clone()));
    match eval_expr_pure(&pred.body, &scope)? {
        Value::Bool(b) => Ok(b),
        other => Err(EvalErrorKind::TypeMismatch(format!(
            "predicate evaluated to {other}"
        ))),
    }
}

fn eval_expr_inner(
    e: &Expr,
    s: &State,
    mut exec: Option<&mut Exec<'_>>,
    point: ControlPointId,
) -> Result<Value, EvalErrorKind> {
    macro_rules! go {
        ($e:expr) => {
            eval_expr_inner($e, s, exec.as_deref_mut(), point)?
        };
    }
    match e {
        Expr::IntLit(n) => Ok(Value::Int(n.clone())),
        Expr::BoolLit(b) => Ok(Value::Bool(*b)),
        Expr::InfLit(pos) => Ok(if *pos { Value::PosInf } else { Value::NegInf }),
        Expr::Var(v) => s
            .get(v)
            .cloned()
            .ok_or_else(|| EvalErrorKind::UndeclaredVar(v.clone())),
        Expr::MetaVar { .. } => Err(EvalErrorKind::MetaVar),
        Expr::Nondet(ty) => {
            let ty = ty.clone().ok_or_else(|| {
                EvalErrorKind::TypeMismatch("nondet with unresolved type".into())
            })?;
            match exec {
                Some(exec) => exec.nd.draw(&ty, point),
                None => Err(EvalErrorKind::TypeMismatch(
                    "nondet in a pure context".into(),
                )),
            }
        }
        Expr::Eq(l, r) => {
            let a = go!(l);
            let b = go!(r);
            Ok(Value::Bool(a == b))
        }
        Expr::Leq(l, r) => {
            let a = go!(l);
            let b = go!(r);
            match a.ext_cmp(&b) {
                Some(ord) => Ok(Value::Bool(ord != std::cmp::Ordering::Greater)),
                None => Err(EvalErrorKind::TypeMismatch(format!("{a} <= {b}"))),
            }
        }
        Expr::Not(x) => match go!(x) {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            other => Err(EvalErrorKind::TypeMismatch(format!("!{other}"))),
        },
        Expr::And(l, r) => match go!(l) {
            Value::Bool(false) => Ok(Value::Bool(false)),
            Value::Bool(true) => match go!(r) {
                Value::Bool(b) => Ok(Value::Bool(b)),
                other => Err(EvalErrorKind::TypeMismatch(format!("&& on {other}"))),
            },
            other => Err(EvalErrorKind::TypeMismatch(format!("&& on {other}"))),
        },
        Expr::Or(l, r) => match go!(l) {
            Value::Bool(true) => Ok(Value::Bool(true)),
            Value::Bool(false) => match go!(r) {
                Value::Bool(b) => Ok(Value::Bool(b)),
                other => Err(EvalErrorKind::TypeMismatch(format!("|| on {other}"))),
            },
            other => Err(EvalErrorKind::TypeMismatch(format!("|| on {other}"))),
        },
        Expr::Add(l, r) => int_binop(go!(l), go!(r), |a, b| Ok(a + b)),
        Expr::Sub(l, r) => int_binop(go!(l), go!(r), |a, b| Ok(a - b)),
        Expr::Mul(l, r) => int_binop(go!(l), go!(r), |a, b| Ok(a * b)),
        Expr::Div(l, r) => int_binop(go!(l), go!(r), |a, b| {
            if b.is_zero() {
                Err(EvalErrorKind::DivByZero)
            } else {
                // BigInt division truncates toward zero, matching C.
                Ok(a / b)
            }
        }),
        Expr::Ite(c, t, f) => match go!(c) {
            Value::Bool(true) => Ok(go!(t)),
            Value::Bool(false) => Ok(go!(f)),
            other => Err(EvalErrorKind::TypeMismatch(format!("ite on {other}"))),
        },
        Expr::ConstArray(x) => {
            let fill = go!(x);
            Ok(Value::Array(FunArray::constant(fill)))
        }
        Expr::Select(a, i) => {
            let arr = as_array(go!(a))?;
            let idx = as_index(go!(i))?;
            Ok(arr.select(&idx))
        }
        Expr::Store(a, i, x) => {
            let arr = as_array(go!(a))?;
            let idx = as_index(go!(i))?;
            let val = go!(x);
            Ok(Value::Array(arr.store(idx, val)))
        }
        Expr::Quant {
            kind,
            array,
            lo,
            hi,
            pred,
        } => {
            let arr = as_array(go!(array))?;
            let lo = as_index(go!(lo))?;
            let hi = as_index(go!(hi))?;
            check_width(&lo, &hi)?;
            let mut i = lo;
            let mut result = matches!(kind, QuantKind::Forall);
            while i < hi {
                let b = eval_pred_at(pred, &arr.select(&i), &i, s)?;
                match kind {
                    QuantKind::Forall if !b => {
                        result = false;
                        break;
                    }
                    QuantKind::Exists if b => {
                        result = true;
                        break;
                    }
                    _ => {}
                }
                i += 1;
            }
            Ok(Value::Bool(result))
        }
        Expr::Aggregate {
            agg,
            array,
            lo,
            hi,
            pred,
        } => {
            let arr = as_array(go!(array))?;
            let lo = as_index(go!(lo))?;
            let hi = as_index(go!(hi))?;
            let spec = agg_spec(*agg, pred.as_ref());
            eval_aggregate_brute(&arr, &lo, &hi, &spec, s)
        }
    }
}

/// Registry spec for a surface aggregation.
pub fn agg_spec(agg: AggName, pred: Option<&LambdaPred>) -> AggregatorSpec {
    let name = match agg {
        AggName::Sum => "sum",
        AggName::Min => "min",
        AggName::Max => "max",
        AggName::Product => "product",
        AggName::Numof => "numof",
    };
    monoid::registry_lookup(name, pred).expect("surface aggregations are registered")
}

/// Fold the homomorphism over `⟨a[l], …, a[u−1]⟩` and apply the finalizer.
/// For `u <= l` this is the finalized monoid identity.
pub fn eval_aggregate_brute(
    a: &FunArray,
    lo: &BigInt,
    hi: &BigInt,
    agg: &AggregatorSpec,
    s: &State,
) -> Result<Value, EvalErrorKind> {
    let folded = fold_aggregate(a, lo, hi, agg, s)?;
    monoid::finalize(agg, &folded).map_err(|e| EvalErrorKind::TypeMismatch(e.to_string()))
}

/// The fold without the finalizer; used to cross-check ghost carrier state.
pub fn fold_aggregate(
    a: &FunArray,
    lo: &BigInt,
    hi: &BigInt,
    agg: &AggregatorSpec,
    s: &State,
) -> Result<Carrier, EvalErrorKind> {
    if hi > lo {
        check_width(lo, hi)?;
    }
    let mut acc = agg.monoid.identity.clone();
    let mut i = lo.clone();
    while &i < hi {
        let x = a.select(&i);
        let lifted = monoid::lift_singleton(agg, &x, agg.indexed.then_some(&i), s)?;
        acc = agg
            .monoid
            .combine(&acc, &lifted)
            .map_err(|e| EvalErrorKind::TypeMismatch(e.to_string()))?;
        i += 1;
    }
    Ok(acc)
}

fn check_width(lo: &BigInt, hi: &BigInt) -> Result<(), EvalErrorKind> {
    if hi - lo > BigInt::from(MAX_AGG_WIDTH) {
        Err(EvalErrorKind::AggregateTooLarge)
    } else {
        Ok(())
    }
}

fn int_binop(
    a: Value,
    b: Value,
    f: impl FnOnce(&BigInt, &BigInt) -> Result<BigInt, EvalErrorKind>,
) -> Result<Value, EvalErrorKind> {
    match (&a, &b) {
        (Value::Int(x), Value::Int(y)) => Ok(Value::Int(f(x, y)?)),
        (Value::NegInf | Value::PosInf, _) | (_, Value::NegInf | Value::PosInf) => {
            Err(EvalErrorKind::InfArithmetic)
        }
        _ => Err(EvalErrorKind::TypeMismatch(format!(
            "integer operation on {a} and {b}"
        ))),
    }
}

fn as_array(v: Value) -> Result<FunArray, EvalErrorKind> {
    match v {
        Value::Array(a) => Ok(a),
        other => Err(EvalErrorKind::TypeMismatch(format!(
            "expected array, got {other}"
        ))),
    }
}

fn as_index(v: Value) -> Result<BigInt, EvalErrorKind> {
    match v {
        Value::Int(n) => Ok(n),
        Value::NegInf | Value::PosInf => Err(EvalErrorKind::InfIndex),
        other => Err(EvalErrorKind::TypeMismatch(format!(
            "expected integer index, got {other}"
        ))),
    }
}

#[allow(unused)]
fn bigint_abs(n: &BigInt) -> BigInt {
    n.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse, parse_expr};
    use crate::typecheck::typecheck;

    fn run_src(src: &str, script: &[i64], budget: u64) -> RunResult {
        let p = typecheck(&parse(src).unwrap()).unwrap().into_program();
        let mut nd = NondetSource::scripted_ints(script);
        run(&p, &mut nd, budget, true)
    }

    fn eval_src(src: &str) -> Value {
        eval_expr_pure(&parse_expr(src).unwrap(), &State::new()).unwrap()
    }

    #[test]
    fn array_axioms() {
        assert_eq!(eval_src("select(store(const(0), 3, 7), 3)"), Value::int(7));
        assert_eq!(eval_src("select(store(const(0), 3, 7), 4)"), Value::int(0));
    }

    #[test]
    fn arithmetic() {
        assert_eq!(eval_src("(16 + 4) / 2"), Value::int(10));
        assert_eq!(eval_src("7 / 2"), Value::int(3));
        assert_eq!(eval_src("-7 / 2"), Value::int(-3), "truncation toward zero");
        assert!(matches!(
            eval_expr_pure(&parse_expr("1 / 0").unwrap(), &State::new()),
            Err(EvalErrorKind::DivByZero)
        ));
    }

    #[test]
    fn triangular_program_with_scripted_n() {
        let src = "Int i = 0; Int s = 0; Int N = nondet; assume(N > 0); \
                   while (i < N) { i = i + 1; s = s + i; } \
                   Int NN = N * N; assert(s == (NN + N) / 2);";
        let r = run_src(src, &[4], 10_000);
        let RunOutcome::Terminated(state) = &r.outcome else {
            panic!("{:?}", r.outcome);
        };
        assert_eq!(state.get("s"), Some(&Value::int(10)));
    }

    #[test]
    fn assert_false_has_unit_trace() {
        let r = run_src("assert(false);", &[], 100);
        assert!(matches!(r.outcome, RunOutcome::AssertFailed { .. }));
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn assume_false_blocks() {
        let r = run_src("assume(false); assert(false);", &[], 100);
        assert!(matches!(r.outcome, RunOutcome::Blocked { .. }));
    }

    #[test]
    fn budget_exceeded_on_infinite_loop() {
        let r = run_src("while (true) { skip; }", &[], 1_000);
        assert_eq!(r.outcome, RunOutcome::BudgetExceeded);
    }

    #[test]
    fn quantifier_semantics() {
        assert_eq!(
            eval_src("\\forall(store(store(const(0), 0, 0), 1, 1), 0, 2, \\lambda(x, i). x == i)"),
            Value::Bool(true)
        );
        assert_eq!(
            eval_src("\\forall(store(const(0), 1, 5), 0, 2, \\lambda(x, i). x == i)"),
            Value::Bool(false)
        );
        assert_eq!(
            eval_src("\\exists(const(0), 0, 3, \\lambda(x, i). x == 2)"),
            Value::Bool(false)
        );
        // Empty interval conventions.
        assert_eq!(
            eval_src("\\forall(const(0), 3, 0, \\lambda(x, i). false)"),
            Value::Bool(true)
        );
        assert_eq!(
            eval_src("\\exists(const(0), 3, 0, \\lambda(x, i). true)"),
            Value::Bool(false)
        );
    }

    #[test]
    fn brute_aggregation_examples() {
        // sum over [1, 2, 3]
        assert_eq!(
            eval_src("\\sum(store(store(store(const(0), 0, 1), 1, 2), 2, 3), 0, 3)"),
            Value::int(6)
        );
        // max over an empty interval is the -inf carrier element
        assert_eq!(eval_src("\\max(const(0), 5, 2)"), Value::NegInf);
        assert_eq!(eval_src("\\min(const(0), 5, 2)"), Value::PosInf);
        // numof(a, 0, 4, λ(x,i). x == i) on [0, 5, 2, 7]
        assert_eq!(
            eval_src(
                "\\numof(store(store(store(store(const(0), 0, 0), 1, 5), 2, 2), 3, 7), 0, 4, \
                 \\lambda(x, i). x == i)"
            ),
            Value::int(2)
        );
        assert_eq!(eval_src("\\product(const(2), 0, 3)"), Value::int(8));
        assert_eq!(eval_src("\\sum(const(0), 4, 4)"), Value::int(0));
    }

    #[test]
    fn brute_matches_direct_folds_on_random_slices() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(42);
        let s = State::new();
        let eq_pred = LambdaPred::new("x", "i", Expr::eq(Expr::var("x"), Expr::var("i")));
        for _ in 0..1_000 {
            let len = rng.gen_range(0..8usize);
            let elems: Vec<i64> = (0..len).map(|_| rng.gen_range(-5..=5)).collect();
            let mut arr = FunArray::constant(Value::int(0));
            for (i, &v) in elems.iter().enumerate() {
                arr = arr.store(BigInt::from(i), Value::int(v));
            }
            let lo = BigInt::from(0);
            let hi = BigInt::from(len);

            // Independent straight-line folds.
            let sum: i64 = elems.iter().sum();
            let product: i64 = elems.iter().product();
            let count = elems
                .iter()
                .enumerate()
                .filter(|(i, v)| **v == *i as i64)
                .count() as i64;
            let all = elems.iter().enumerate().all(|(i, v)| *v == i as i64);
            let any = elems.iter().enumerate().any(|(i, v)| *v == i as i64);

            let check = |name: &str, pred: Option<&LambdaPred>, expect: Value| {
                let spec = monoid::registry_lookup(name, pred).unwrap();
                let got = eval_aggregate_brute(&arr, &lo, &hi, &spec, &s).unwrap();
                assert_eq!(got, expect, "{name} on {elems:?}");
            };
            check("sum", None, Value::int(sum));
            check("product", None, Value::int(product));
            check("numof", Some(&eq_pred), Value::int(count));
            check("forall", Some(&eq_pred), Value::Bool(all));
            check("exists", Some(&eq_pred), Value::Bool(any));
            check("exists-cancellative", Some(&eq_pred), Value::Bool(any));
            check(
                "product-cancellative",
                None,
                Value::int(product),
            );
            check(
                "max",
                None,
                elems.iter().max().map(|&m| Value::int(m)).unwrap_or(Value::NegInf),
            );
            check(
                "min",
                None,
                elems.iter().min().map(|&m| Value::int(m)).unwrap_or(Value::PosInf),
            );
        }
    }

    #[test]
    fn homomorphism_law_on_random_splits() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(11);
        let s = State::new();
        let pred = LambdaPred::new("x", "i", Expr::leq(Expr::int(0), Expr::var("x")));
        for name in monoid::REGISTRY_NAMES {
            let spec = monoid::registry_lookup(name, Some(&pred)).unwrap();
            for _ in 0..300 {
                let len = rng.gen_range(0..10usize);
                let cut = rng.gen_range(0..=len);
                let mut arr = FunArray::constant(Value::int(0));
                for i in 0..len {
                    arr = arr.store(BigInt::from(i), Value::int(rng.gen_range(-4..=4)));
                }
                let whole =
                    fold_aggregate(&arr, &BigInt::from(0), &BigInt::from(len), &spec, &s).unwrap();
                let left =
                    fold_aggregate(&arr, &BigInt::from(0), &BigInt::from(cut), &spec, &s).unwrap();
                let right =
                    fold_aggregate(&arr, &BigInt::from(cut), &BigInt::from(len), &spec, &s)
                        .unwrap();
                let merged = spec.monoid.combine(&left, &right).unwrap();
                assert_eq!(whole, merged, "{name}: fold(s·t) = fold(s) ∘ fold(t)");
            }
        }
    }

    #[test]
    fn scripted_runs_are_deterministic() {
        let src = "Int N = nondet; Int i = 0; Int s = 0; \
                   while (i < N) { s = s + i; i = i + 1; }";
        let a = run_src(src, &[5], 1000);
        let b = run_src(src, &[5], 1000);
        let (RunOutcome::Terminated(sa), RunOutcome::Terminated(sb)) = (&a.outcome, &b.outcome)
        else {
            panic!()
        };
        assert_eq!(sa, sb);
        assert_eq!(a.trace.len(), b.trace.len());
    }

    #[test]
    fn trace_jsonl_shape() {
        let r = run_src("Int x = 3; Array Int a = const(0); a = store(a, 0, x);", &[], 100);
        let jsonl = trace_to_jsonl(&r.trace);
        let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        assert_eq!(first["step"], 0);
        assert!(first["point"].is_number());
        assert_eq!(first["vars"]["x"], 3);
        let last: serde_json::Value = serde_json::from_str(jsonl.lines().last().unwrap()).unwrap();
        assert_eq!(last["vars"]["a"]["default"], 0);
        assert_eq!(last["vars"]["a"]["entries"]["0"], 3);
    }
}
