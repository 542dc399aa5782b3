//! Loading operator definitions from `.op.toml` files.
//!
//! ```toml
//! name = "square"
//!
//! [[ghost]]
//! name = "x_sq"
//! type = "Int"
//! init = "0"
//!
//! [[rule]]
//! id = "R4"
//! pattern = "$y = $x * $x"
//! template = "assert($x == x_shad); $y = x_sq;"
//!
//! [invariant]
//! formula = "x_sq == x_shad * x_shad"
//! ```
//!
//! Patterns and templates use `$name` meta-variables (`$name:var`,
//! `$name:lit` restrict what they match). Templates may assign only to the
//! pattern's left-hand side and declared ghosts.

use std::collections::BTreeSet;

use serde::Deserialize;

use crate::ast::{Expr, StmtKind, TypeExpr};
use crate::error::InstrError;
use crate::instr::{GhostDecl, InstrumentationOperator, RewriteRule, StateGen};
use crate::parser;

#[derive(Debug, Deserialize)]
struct RawOperator {
    name: String,
    #[serde(default, rename = "ghost")]
    ghosts: Vec<RawGhost>,
    #[serde(default, rename = "rule")]
    rules: Vec<RawRule>,
    invariant: RawInvariant,
}

#[derive(Debug, Deserialize)]
struct RawGhost {
    name: String,
    #[serde(rename = "type")]
    ty: String,
    init: String,
}

#[derive(Debug, Deserialize)]
struct RawRule {
    id: String,
    pattern: String,
    template: String,
}

#[derive(Debug, Deserialize)]
struct RawInvariant {
    formula: String,
}

/// Parse an operator definition from TOML text.
pub fn load_operator(text: &str) -> Result<InstrumentationOperator, InstrError> {
    let raw: RawOperator =
        toml::from_str(text).map_err(|e| InstrError::OperatorFile(e.to_string()))?;

    let mut ghosts = Vec::new();
    for g in &raw.ghosts {
        let ty = parse_type(&g.ty)?;
        let init = parser::parse_expr(&g.init)
            .map_err(|e| InstrError::OperatorFile(format!("ghost `{}` init: {e}", g.name)))?;
        ghosts.push(GhostDecl::new(g.name.clone(), ty, init));
    }
    let ghost_names: BTreeSet<String> = ghosts.iter().map(|g| g.name.clone()).collect();

    let mut rules = Vec::new();
    for r in &raw.rules {
        let pattern_stmts = parser::parse_schematic_stmts(&ensure_semi(&r.pattern))
            .map_err(|e| InstrError::OperatorFile(format!("rule `{}` pattern: {e}", r.id)))?;
        let [pattern_stmt] = pattern_stmts.as_slice() else {
            return Err(InstrError::OperatorFile(format!(
                "rule `{}`: pattern must be a single assignment",
                r.id
            )));
        };
        let StmtKind::Assign { lhs, rhs } = &pattern_stmt.kind else {
            return Err(InstrError::OperatorFile(format!(
                "rule `{}`: pattern must be an assignment",
                r.id
            )));
        };
        let Some(lhs_meta) = lhs.strip_prefix('$') else {
            return Err(InstrError::OperatorFile(format!(
                "rule `{}`: pattern left-hand side must be a meta-variable",
                r.id
            )));
        };
        let template = parser::parse_schematic_stmts(&r.template)
            .map_err(|e| InstrError::OperatorFile(format!("rule `{}` template: {e}", r.id)))?;

        // Def.-style sanity: templates assign only the matched left-hand
        // side and ghosts, contain no loops, and reference only pattern
        // meta-variables.
        let pattern_metas = collect_metas(rhs);
        for t in &template {
            let mut err = None;
            t.visit(&mut |s| {
                if err.is_some() {
                    return;
                }
                match &s.kind {
                    StmtKind::While { .. } => {
                        err = Some("templates must be loop-free".to_string());
                    }
                    StmtKind::Assign { lhs: a, .. } => {
                        if let Some(m) = a.strip_prefix('$') {
                            if m != lhs_meta {
                                err = Some(format!("template assigns unknown meta `${m}`"));
                            }
                        } else if !ghost_names.contains(a) {
                            err = Some(format!("template assigns non-ghost `{a}`"));
                        }
                    }
                    StmtKind::Decl { .. } => {
                        err = Some("templates may not declare variables".to_string());
                    }
                    _ => {}
                }
                let mut visit_expr = |e: &Expr| {
                    collect_metas_into(e, &mut |m| {
                        if m != lhs_meta && !pattern_metas.contains(m) && err.is_none() {
                            err = Some(format!("template uses unbound meta `${m}`"));
                        }
                    })
                };
                match &s.kind {
                    StmtKind::Assign { rhs, .. } => visit_expr(rhs),
                    StmtKind::Assert(e) | StmtKind::Assume(e) => visit_expr(e),
                    StmtKind::If { cond, .. } => visit_expr(cond),
                    _ => {}
                }
            });
            if let Some(msg) = err {
                return Err(InstrError::OperatorFile(format!("rule `{}`: {msg}", r.id)));
            }
        }

        rules.push(RewriteRule {
            id: r.id.clone(),
            lhs_meta: lhs_meta.to_string(),
            pattern: rhs.clone(),
            template,
        });
    }

    let invariant = parser::parse_expr(&raw.invariant.formula)
        .map_err(|e| InstrError::OperatorFile(format!("invariant: {e}")))?;

    Ok(InstrumentationOperator {
        name: raw.name,
        ghosts,
        rules,
        invariant,
        aggregator: None,
        state_gen: StateGen::Rejection,
    })
}

/// Render a builtin operator as an `.op.toml` document (the inverse of
/// `load_operator` for operators without predicate parameters).
pub fn operator_to_toml(op: &InstrumentationOperator) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "name = {:?}", op.name);
    for g in &op.ghosts {
        let _ = writeln!(out);
        let _ = writeln!(out, "[[ghost]]");
        let _ = writeln!(out, "name = {:?}", g.name);
        let _ = writeln!(out, "type = {:?}", g.ty.to_string());
        let _ = writeln!(out, "init = {:?}", crate::pretty::pretty_expr(&g.init));
    }
    for r in &op.rules {
        let _ = writeln!(out);
        let _ = writeln!(out, "[[rule]]");
        let _ = writeln!(out, "id = {:?}", r.id);
        let _ = writeln!(
            out,
            "pattern = {:?}",
            format!("${} = {}", r.lhs_meta, crate::pretty::pretty_expr(&r.pattern))
        );
        let mut tmpl = String::new();
        for s in &r.template {
            tmpl.push_str(&crate::pretty::pretty_stmt(s));
        }
        let _ = writeln!(out, "template = '''\n{tmpl}'''");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[invariant]");
    let _ = writeln!(
        out,
        "formula = {:?}",
        crate::pretty::pretty_expr(&op.invariant)
    );
    out
}

fn ensure_semi(s: &str) -> String {
    let t = s.trim();
    if t.ends_with(';') {
        t.to_string()
    } else {
        format!("{t};")
    }
}

fn parse_type(s: &str) -> Result<TypeExpr, InstrError> {
    let mut words = s.split_whitespace().rev();
    let mut ty = match words.next() {
        Some("Int") => TypeExpr::Int,
        Some("Bool") => TypeExpr::Bool,
        other => {
            return Err(InstrError::OperatorFile(format!(
                "bad type `{s}` ({other:?})"
            )))
        }
    };
    for w in words {
        if w == "Array" {
            ty = TypeExpr::array(ty);
        } else {
            return Err(InstrError::OperatorFile(format!("bad type `{s}`")));
        }
    }
    Ok(ty)
}

fn collect_metas(e: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_metas_into(e, &mut |m| {
        out.insert(m.to_string());
    });
    out
}

fn collect_metas_into(e: &Expr, f: &mut impl FnMut(&str)) {
    match e {
        Expr::MetaVar { name, .. } => f(name),
        Expr::Eq(l, r)
        | Expr::Leq(l, r)
        | Expr::And(l, r)
        | Expr::Or(l, r)
        | Expr::Add(l, r)
        | Expr::Sub(l, r)
        | Expr::Mul(l, r)
        | Expr::Div(l, r) => {
            collect_metas_into(l, f);
            collect_metas_into(r, f);
        }
        Expr::Not(x) | Expr::ConstArray(x) => collect_metas_into(x, f),
        Expr::Ite(c, t, e2) => {
            collect_metas_into(c, f);
            collect_metas_into(t, f);
            collect_metas_into(e2, f);
        }
        Expr::Select(a, i) => {
            collect_metas_into(a, f);
            collect_metas_into(i, f);
        }
        Expr::Store(a, i, x) => {
            collect_metas_into(a, f);
            collect_metas_into(i, f);
            collect_metas_into(x, f);
        }
        Expr::Quant { array, lo, hi, .. } | Expr::Aggregate { array, lo, hi, .. } => {
            collect_metas_into(array, f);
            collect_metas_into(lo, f);
            collect_metas_into(hi, f);
        }
        _ => {}
    }
}
