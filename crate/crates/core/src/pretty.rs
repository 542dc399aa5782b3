//! Pretty-printer. `parse(pretty_print(p))` reproduces the AST up to
//! control point ids.

use std::fmt::Write;

use crate::ast::*;

pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    match &p.body.kind {
        StmtKind::Block(ss) => {
            for s in ss {
                print_stmt(&mut out, s, 0);
            }
        }
        _ => print_stmt(&mut out, &p.body, 0),
    }
    out
}

pub fn pretty_stmt(s: &Stmt) -> String {
    let mut out = String::new();
    print_stmt(&mut out, s, 0);
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_stmt(out: &mut String, s: &Stmt, level: usize) {
    match &s.kind {
        StmtKind::Skip => {
            indent(out, level);
            out.push_str("skip;\n");
        }
        StmtKind::Decl { name, ty, rhs } => {
            indent(out, level);
            match rhs {
                Some(e) => {
                    let _ = writeln!(out, "{ty} {name} = {};", pretty_expr(e));
                }
                None => {
                    let _ = writeln!(out, "{ty} {name};");
                }
            }
        }
        StmtKind::Assign { lhs, rhs } => {
            indent(out, level);
            let _ = writeln!(out, "{lhs} = {};", pretty_expr(rhs));
        }
        StmtKind::Block(ss) => {
            // A bare block at statement position only arises from `else if`
            // chains, which are printed by the If case; print contents.
            for inner in ss {
                print_stmt(out, inner, level);
            }
        }
        StmtKind::While { cond, body } => {
            indent(out, level);
            let _ = writeln!(out, "while ({}) {{", pretty_expr(cond));
            print_body(out, body, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            indent(out, level);
            let _ = writeln!(out, "if ({}) {{", pretty_expr(cond));
            print_body(out, then_branch, level + 1);
            indent(out, level);
            out.push('}');
            print_else(out, else_branch, level);
            out.push('\n');
        }
        StmtKind::Assert(e) => {
            indent(out, level);
            let _ = writeln!(out, "assert({});", pretty_expr(e));
        }
        StmtKind::Assume(e) => {
            indent(out, level);
            let _ = writeln!(out, "assume({});", pretty_expr(e));
        }
    }
}

fn print_body(out: &mut String, body: &Stmt, level: usize) {
    match &body.kind {
        StmtKind::Block(ss) => {
            for s in ss {
                print_stmt(out, s, level);
            }
        }
        _ => print_stmt(out, body, level),
    }
}

fn print_else(out: &mut String, else_branch: &Stmt, level: usize) {
    // Omit `else skip`; print `else if` chains flat.
    match &else_branch.kind {
        StmtKind::Skip => {}
        StmtKind::Block(ss) if ss.is_empty() => {}
        StmtKind::Block(ss) if ss.len() == 1 && matches!(ss[0].kind, StmtKind::If { .. }) => {
            let StmtKind::If {
                cond,
                then_branch,
                else_branch: nested_else,
            } = &ss[0].kind
            else {
                unreachable!()
            };
            let _ = writeln!(out, " else if ({}) {{", pretty_expr(cond));
            print_body(out, then_branch, level + 1);
            indent(out, level);
            out.push('}');
            print_else(out, nested_else, level);
        }
        _ => {
            out.push_str(" else {\n");
            print_body(out, else_branch, level + 1);
            indent(out, level);
            out.push('}');
        }
    }
}

// Precedence levels, loosest to tightest:
// 0 or, 1 and, 2 comparison, 3 additive, 4 multiplicative, 5 unary, 6 atom.
// Negated comparisons print in sugared form (`<`, `!=`), so they carry
// comparison precedence.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Or(..) => 0,
        Expr::And(..) => 1,
        Expr::Eq(..) | Expr::Leq(..) => 2,
        Expr::Not(inner) if matches!(**inner, Expr::Leq(..) | Expr::Eq(..)) => 2,
        Expr::Add(..) | Expr::Sub(..) => 3,
        Expr::Mul(..) | Expr::Div(..) => 4,
        Expr::Not(..) => 5,
        _ => 6,
    }
}

pub fn pretty_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_child(out: &mut String, e: &Expr, min_prec: u8) {
    if prec(e) < min_prec {
        out.push('(');
        write_expr(out, e, 0);
        out.push(')');
    } else {
        write_expr(out, e, min_prec);
    }
}

fn write_expr(out: &mut String, e: &Expr, _ctx: u8) {
    match e {
        Expr::IntLit(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::BoolLit(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::InfLit(pos) => out.push_str(if *pos { "posinf" } else { "neginf" }),
        Expr::Var(v) => out.push_str(v),
        Expr::MetaVar { name, kind } => {
            let _ = write!(out, "${name}");
            match kind {
                MetaKind::Var => out.push_str(":var"),
                MetaKind::Lit => out.push_str(":lit"),
                MetaKind::Expr => {}
            }
        }
        Expr::Nondet(_) => out.push_str("nondet"),
        Expr::Or(l, r) => {
            write_child(out, l, 0);
            out.push_str(" || ");
            write_child(out, r, 1);
        }
        Expr::And(l, r) => {
            write_child(out, l, 1);
            out.push_str(" && ");
            write_child(out, r, 2);
        }
        Expr::Eq(l, r) => {
            write_child(out, l, 3);
            out.push_str(" == ");
            write_child(out, r, 3);
        }
        Expr::Leq(l, r) => {
            write_child(out, l, 3);
            out.push_str(" <= ");
            write_child(out, r, 3);
        }
        Expr::Add(l, r) => {
            write_child(out, l, 3);
            out.push_str(" + ");
            write_child(out, r, 4);
        }
        Expr::Sub(l, r) => {
            write_child(out, l, 3);
            out.push_str(" - ");
            write_child(out, r, 4);
        }
        Expr::Mul(l, r) => {
            write_child(out, l, 4);
            out.push_str(" * ");
            write_child(out, r, 5);
        }
        Expr::Div(l, r) => {
            write_child(out, l, 4);
            out.push_str(" / ");
            write_child(out, r, 5);
        }
        Expr::Not(x) => match &**x {
            // Sugared comparison forms; they reparse to this exact AST.
            Expr::Leq(l, r) => {
                write_child(out, r, 3);
                out.push_str(" < ");
                write_child(out, l, 3);
            }
            Expr::Eq(l, r) => {
                write_child(out, l, 3);
                out.push_str(" != ");
                write_child(out, r, 3);
            }
            _ => {
                out.push('!');
                write_child(out, x, 6);
            }
        },
        Expr::Ite(c, t, f) => {
            out.push_str("ite(");
            write_expr(out, c, 0);
            out.push_str(", ");
            write_expr(out, t, 0);
            out.push_str(", ");
            write_expr(out, f, 0);
            out.push(')');
        }
        Expr::ConstArray(x) => {
            out.push_str("const(");
            write_expr(out, x, 0);
            out.push(')');
        }
        Expr::Select(a, i) => {
            out.push_str("select(");
            write_expr(out, a, 0);
            out.push_str(", ");
            write_expr(out, i, 0);
            out.push(')');
        }
        Expr::Store(a, i, x) => {
            out.push_str("store(");
            write_expr(out, a, 0);
            out.push_str(", ");
            write_expr(out, i, 0);
            out.push_str(", ");
            write_expr(out, x, 0);
            out.push(')');
        }
        Expr::Quant {
            kind,
            array,
            lo,
            hi,
            pred,
        } => {
            let _ = write!(out, "{}(", kind.keyword());
            write_expr(out, array, 0);
            out.push_str(", ");
            write_expr(out, lo, 0);
            out.push_str(", ");
            write_expr(out, hi, 0);
            out.push_str(", ");
            write_lambda(out, pred);
            out.push(')');
        }
        Expr::Aggregate {
            agg,
            array,
            lo,
            hi,
            pred,
        } => {
            let _ = write!(out, "{}(", agg.keyword());
            write_expr(out, array, 0);
            out.push_str(", ");
            write_expr(out, lo, 0);
            out.push_str(", ");
            write_expr(out, hi, 0);
            if let Some(p) = pred {
                out.push_str(", ");
                write_lambda(out, p);
            }
            out.push(')');
        }
    }
}

fn write_lambda(out: &mut String, p: &LambdaPred) {
    let _ = write!(out, "\\lambda({}, {}). ", p.value_var, p.index_var);
    write_expr(out, &p.body, 2);
}
