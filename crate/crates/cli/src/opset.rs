//! Resolving operator names and files into a single (possibly composed)
//! instrumentation operator for a given program.

use instrumenta_core::ast::{visit_children, Expr, LambdaPred, Program, QuantKind};
use instrumenta_core::instr::builders::builtin_operator;
use instrumenta_core::instr::{compose, opfile, InstrumentationOperator};

/// Predicates appearing in the program's quantifier/numof expressions,
/// grouped by the operator family that consumes them.
fn collect_preds(p: &Program) -> Vec<(String, LambdaPred)> {
    let mut out: Vec<(String, LambdaPred)> = Vec::new();
    let mut push = |family: &str, pred: &LambdaPred| {
        if !out
            .iter()
            .any(|(f, q)| f == family && q.alpha_eq(pred))
        {
            out.push((family.to_string(), pred.clone()));
        }
    };
    p.body.visit_exprs(&mut |e| {
        let mut stack = vec![e];
        while let Some(e) = stack.pop() {
            match e {
                Expr::Quant { kind, pred, .. } => {
                    let family = match kind {
                        QuantKind::Forall => "forall",
                        QuantKind::Exists => "exists",
                    };
                    push(family, pred);
                }
                Expr::Aggregate {
                    pred: Some(pred), ..
                } => push("numof", pred),
                _ => {}
            }
            visit_children(e, &mut |c| stack.push(c));
        }
    });
    out
}

/// Instantiate one named operator against a program. Predicate-parameterized
/// operators are instantiated once per matching predicate occurring in the
/// program and composed.
pub fn resolve_named(name: &str, p: &Program) -> Result<InstrumentationOperator, String> {
    let needs_pred = matches!(
        name,
        "forall" | "exists" | "numof" | "exists-cancellative"
    );
    if !needs_pred {
        return builtin_operator(name, None).map_err(|e| e.to_string());
    }
    let family = if name == "exists-cancellative" {
        "exists"
    } else {
        name
    };
    let preds: Vec<LambdaPred> = collect_preds(p)
        .into_iter()
        .filter(|(f, _)| f == family)
        .map(|(_, q)| q)
        .collect();
    if preds.is_empty() {
        return Err(format!(
            "operator `{name}` is predicate-parameterized, but the program contains no matching \
             quantifier"
        ));
    }
    let mut ops = preds
        .iter()
        .map(|q| builtin_operator(name, Some(q)).map_err(|e| e.to_string()));
    let first = ops.next().unwrap()?;
    ops.try_fold(first, |acc, op| Ok(compose(&acc, &op?)))
}

/// Resolve the full operator set from `--op` names and `--op-file` paths.
/// With neither given, pick operators automatically from the aggregations
/// the program uses.
pub fn resolve(
    names: &[String],
    files: &[std::path::PathBuf],
    p: &Program,
) -> Result<InstrumentationOperator, String> {
    let mut ops: Vec<InstrumentationOperator> = Vec::new();
    for name in names {
        ops.push(resolve_named(name, p)?);
    }
    for path in files {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        ops.push(opfile::load_operator(&text).map_err(|e| e.to_string())?);
    }
    if ops.is_empty() {
        for name in auto_names(p) {
            ops.push(resolve_named(&name, p)?);
        }
    }
    if ops.is_empty() {
        return Err(
            "no operator selected and the program contains no aggregation to pick one from"
                .to_string(),
        );
    }
    let mut it = ops.into_iter();
    let first = it.next().unwrap();
    Ok(it.fold(first, |acc, op| compose(&acc, &op)))
}

/// Operator names inferred from the aggregations occurring in the program.
fn auto_names(p: &Program) -> Vec<String> {
    use instrumenta_core::ast::AggName;
    let mut out: Vec<String> = Vec::new();
    let mut push = |name: &str| {
        if !out.iter().any(|n| n == name) {
            out.push(name.to_string());
        }
    };
    p.body.visit_exprs(&mut |e| {
        let mut stack = vec![e];
        while let Some(e) = stack.pop() {
            match e {
                Expr::Quant { kind, .. } => push(match kind {
                    QuantKind::Forall => "forall",
                    QuantKind::Exists => "exists",
                }),
                Expr::Aggregate { agg, .. } => push(match agg {
                    AggName::Sum => "sum",
                    AggName::Min => "min",
                    AggName::Max => "max",
                    AggName::Product => "product",
                    AggName::Numof => "numof",
                }),
                _ => {}
            }
            visit_children(e, &mut |c| stack.push(c));
        }
    });
    out
}
