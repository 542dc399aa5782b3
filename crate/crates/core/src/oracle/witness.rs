//! Witnesses (inductive invariants per loop head) and their
//! back-translation: conjoin the instrumentation invariant and
//! existentially quantify the ghost variables, yielding formulas over the
//! program vocabulary alone.

use std::collections::BTreeMap;

use crate::ast::{ControlPointId, Expr};
use crate::error::OracleError;
use crate::eval::{eval_expr_pure, Trace};
use crate::instr::{InstrumentationOperator, InstrumentedProgram};
use crate::value::{State, Value};

/// One loop head's invariant: a Boolean formula with an optional prefix of
/// existentially quantified variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessEntry {
    pub exists_vars: Vec<String>,
    pub formula: Expr,
}

impl WitnessEntry {
    pub fn plain(formula: Expr) -> WitnessEntry {
        WitnessEntry {
            exists_vars: Vec::new(),
            formula,
        }
    }
}

impl std::fmt::Display for WitnessEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.exists_vars.is_empty() {
            write!(f, "{}", crate::pretty::pretty_expr(&self.formula))
        } else {
            write!(
                f,
                "exists {}. ({})",
                self.exists_vars.join(", "),
                crate::pretty::pretty_expr(&self.formula)
            )
        }
    }
}

/// Per-loop-head witness formulas.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WitnessFormula {
    pub per_loop: BTreeMap<ControlPointId, WitnessEntry>,
}

impl std::fmt::Display for WitnessFormula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (point, entry) in &self.per_loop {
            writeln!(f, "loop {point}: {entry}")?;
        }
        Ok(())
    }
}

/// Conjoin the operator's instrumentation invariant (appended last) and
/// existentially quantify its ghost variables.
pub fn back_translate_witness(
    w: &WitnessFormula,
    op: &InstrumentationOperator,
) -> WitnessFormula {
    let ghosts: Vec<String> = op.ghosts.iter().map(|g| g.name.clone()).collect();
    let per_loop = w
        .per_loop
        .iter()
        .map(|(point, entry)| {
            let mut exists_vars = entry.exists_vars.clone();
            exists_vars.extend(ghosts.iter().cloned());
            (
                *point,
                WitnessEntry {
                    exists_vars,
                    formula: Expr::and(entry.formula.clone(), op.invariant.clone()),
                },
            )
        })
        .collect();
    WitnessFormula { per_loop }
}

/// Evaluate a witness entry at a state. Existential variables are resolved
/// from defining equations (`g == e` conjuncts with `e` over known
/// variables, iterated to a fixpoint); variables the state already binds
/// (e.g. ghost values from an instrumented run) are used directly, and any
/// remaining ones take their `fallback` binding (typically the operator's
/// initial ghost values).
pub fn eval_witness_entry(
    entry: &WitnessEntry,
    state: &State,
    fallback: &State,
) -> Result<bool, String> {
    let mut scope = state.clone();
    let mut pending: Vec<&String> = entry
        .exists_vars
        .iter()
        .filter(|v| scope.get(v).is_none())
        .collect();

    let mut conjuncts = Vec::new();
    flatten_conjuncts(&entry.formula, &mut conjuncts);

    // Propagate defining equations until no progress.
    while !pending.is_empty() {
        let mut resolved_any = false;
        pending.retain(|v| {
            for c in &conjuncts {
                if let Some(e) = defines(c, v) {
                    if let Ok(val) = eval_expr_pure(e, &scope) {
                        scope.set((*v).clone(), val);
                        resolved_any = true;
                        return false;
                    }
                }
            }
            true
        });
        if !resolved_any {
            break;
        }
    }
    pending.retain(|v| match fallback.get(v) {
        Some(val) => {
            scope.set((*v).clone(), val.clone());
            false
        }
        None => true,
    });
    if !pending.is_empty() {
        return Err(format!(
            "cannot determine existential variable(s): {}",
            pending
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    match eval_expr_pure(&entry.formula, &scope) {
        Ok(Value::Bool(b)) => Ok(b),
        Ok(other) => Err(format!("witness evaluated to {other}")),
        Err(e) => Err(e.to_string()),
    }
}

fn flatten_conjuncts<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match e {
        Expr::And(l, r) => {
            flatten_conjuncts(l, out);
            flatten_conjuncts(r, out);
        }
        other => out.push(other),
    }
}

/// If the conjunct has the shape `v == e` or `e == v`, return `e`.
fn defines<'a>(c: &'a Expr, v: &str) -> Option<&'a Expr> {
    match c {
        Expr::Eq(l, r) => match (&**l, &**r) {
            (Expr::Var(name), _) if name == v && !r.mentions_var(v) => Some(r),
            (_, Expr::Var(name)) if name == v && !l.mentions_var(v) => Some(l),
            _ => None,
        },
        _ => None,
    }
}

/// Project a counterexample trace of an instrumented program back onto the
/// original program: keep images of original points, remap them, and drop
/// ghost bindings. Fails when the trace ends at an added assertion.
pub fn back_translate_cex(trace: &Trace, ip: &InstrumentedProgram) -> Result<Trace, OracleError> {
    let failing = trace
        .last()
        .ok_or(OracleError::NotOriginalAssertion)?
        .point;
    if !ip.is_original_assert(failing) {
        return Err(OracleError::NotOriginalAssertion);
    }
    let mut out = Vec::new();
    for step in trace {
        if let Some(orig) = ip.original_point(step.point) {
            out.push(crate::eval::TraceStep {
                point: orig,
                state: step.state.restrict(|v| !ip.ghost_vocab.contains(v)),
            });
        }
    }
    Ok(out)
}
