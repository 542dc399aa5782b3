//! External Horn-solver client: writes the script to a file, runs
//! `<cmd> <file.smt2>` with a wall-clock kill, and parses the first
//! sat/unsat/unknown token. For `sat`, `define-fun` model bodies over linear
//! arithmetic, Booleans, and array reads are parsed back into witness
//! formulas; anything else degrades to a witness-free `Correct`.

use std::collections::BTreeMap;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_bigint::BigInt;

use crate::ast::Expr;
use crate::error::OracleError;
use crate::oracle::chc::{ChcScript, ParamLayout, PredInfo};
use crate::oracle::{OracleVerdict, WitnessEntry, WitnessFormula};

/// Environment variable consulted for the solver command when none is set.
pub const SOLVER_ENV: &str = "INSTRUMENTA_SOLVER";

/// Run an external solver on an encoded script.
pub fn solve_external(
    chc: &ChcScript,
    solver_cmd: &str,
    timeout: Duration,
) -> Result<OracleVerdict, OracleError> {
    let dir = std::env::temp_dir();
    let file = dir.join(format!(
        "instrumenta-{}-{}.smt2",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0)
    ));
    std::fs::write(&file, &chc.text)?;
    let result = run_solver_process(solver_cmd, &file, timeout);
    let _ = std::fs::remove_file(&file);
    let output = result?;

    let verdict = match output {
        SolverOutput::TimedOut => OracleVerdict::Unknown {
            reason: format!("solver timeout after {timeout:?}"),
        },
        SolverOutput::Finished(text) => {
            let mut lines = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with(';'));
            match lines.next() {
                Some("sat") => {
                    let rest: String = lines.collect::<Vec<_>>().join("\n");
                    let witness = parse_model(&rest, &chc.preds);
                    OracleVerdict::Correct { witness }
                }
                Some("unsat") => OracleVerdict::Incorrect { trace: Vec::new() },
                Some("unknown") => OracleVerdict::Unknown {
                    reason: "solver returned unknown".to_string(),
                },
                other => {
                    return Err(OracleError::SolverOutputParse(format!(
                        "unexpected solver output: {other:?}"
                    )))
                }
            }
        }
    };
    Ok(verdict)
}

enum SolverOutput {
    Finished(String),
    TimedOut,
}

fn run_solver_process(
    solver_cmd: &str,
    file: &std::path::Path,
    timeout: Duration,
) -> Result<SolverOutput, OracleError> {
    let mut parts = solver_cmd.split_whitespace();
    let bin = parts.next().ok_or_else(|| OracleError::SolverLaunch {
        cmd: solver_cmd.to_string(),
        reason: "empty command".to_string(),
    })?;
    let mut child = Command::new(bin)
        .args(parts)
        .arg(file)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| OracleError::SolverLaunch {
            cmd: solver_cmd.to_string(),
            reason: e.to_string(),
        })?;

    let deadline = Instant::now() + timeout;
    loop {
        match child.try_wait() {
            Ok(Some(_status)) => {
                let mut out = String::new();
                if let Some(mut stdout) = child.stdout.take() {
                    use std::io::Read;
                    let _ = stdout.read_to_string(&mut out);
                }
                return Ok(SolverOutput::Finished(out));
            }
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Ok(SolverOutput::TimedOut);
                }
                std::thread::sleep(Duration::from_millis(20));
            }
            Err(e) => {
                return Err(OracleError::SolverLaunch {
                    cmd: solver_cmd.to_string(),
                    reason: e.to_string(),
                })
            }
        }
    }
}

/// CHC back end as a search oracle: encode, hand to the external solver,
/// and map `unsat` refutations to a concrete trace via a small bounded
/// replay (a refutation without a trace cannot be attributed to an original
/// assertion, so it degrades to `Unknown`).
pub struct ChcOracle {
    pub cmd: String,
    pub base_timeout: Duration,
    /// Domain used to reconstruct a concrete counterexample after `unsat`.
    pub replay_dom: Option<crate::oracle::BoundedDomain>,
}

impl ChcOracle {
    pub fn new(cmd: impl Into<String>, base_timeout: Duration) -> ChcOracle {
        ChcOracle {
            cmd: cmd.into(),
            base_timeout,
            replay_dom: Some(crate::oracle::BoundedDomain::default()),
        }
    }
}

impl crate::oracle::Oracle for ChcOracle {
    fn check(
        &self,
        p: &crate::ast::Program,
        budget: crate::oracle::OracleBudget,
    ) -> Result<OracleVerdict, OracleError> {
        let chc = match crate::oracle::chc::encode_chc(p) {
            Ok(c) => c,
            Err(OracleError::UnsupportedNode(reason)) => {
                return Ok(OracleVerdict::Unknown { reason })
            }
            Err(e) => return Err(e),
        };
        let timeout = self.base_timeout * (1u32 << budget.level.min(8));
        let verdict = solve_external(&chc, &self.cmd, timeout)?;
        Ok(match verdict {
            OracleVerdict::Incorrect { trace } if trace.is_empty() => {
                // Best effort: replay the program bounded to recover a trace.
                match &self.replay_dom {
                    Some(dom) => match crate::oracle::check_bounded(p, dom) {
                        OracleVerdict::Incorrect { trace } => OracleVerdict::Incorrect { trace },
                        _ => OracleVerdict::Unknown {
                            reason: "refuted, but no concrete trace could be reconstructed"
                                .to_string(),
                        },
                    },
                    None => OracleVerdict::Incorrect { trace },
                }
            }
            other => other,
        })
    }

    fn name(&self) -> &'static str {
        "chc"
    }
}

/// Bounded refutation hunting first, then the CHC back end for proofs.
pub struct AutoOracle {
    pub bounded: crate::oracle::BoundedOracle,
    pub chc: Option<ChcOracle>,
}

impl crate::oracle::Oracle for AutoOracle {
    fn check(
        &self,
        p: &crate::ast::Program,
        budget: crate::oracle::OracleBudget,
    ) -> Result<OracleVerdict, OracleError> {
        match self.bounded.check(p, budget)? {
            OracleVerdict::Unknown { reason } => match &self.chc {
                Some(chc) => chc.check(p, budget),
                None => Ok(OracleVerdict::Unknown { reason }),
            },
            decisive => Ok(decisive),
        }
    }

    fn name(&self) -> &'static str {
        "auto"
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize_sexp(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            '|' => {
                // quoted symbol
                let mut sym = String::new();
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                    sym.push(c);
                }
                out.push(sym);
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_sexps(text: &str) -> Option<Vec<Sexp>> {
    let tokens = tokenize_sexp(text);
    let mut pos = 0;
    let mut out = Vec::new();
    while pos < tokens.len() {
        out.push(parse_one(&tokens, &mut pos)?);
    }
    Some(out)
}

fn parse_one(tokens: &[String], pos: &mut usize) -> Option<Sexp> {
    match tokens.get(*pos)?.as_str() {
        "(" => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos)?.as_str() {
                    ")" => {
                        *pos += 1;
                        return Some(Sexp::List(items));
                    }
                    _ => items.push(parse_one(tokens, pos)?),
                }
            }
        }
        ")" => None,
        atom => {
            *pos += 1;
            Some(Sexp::Atom(atom.to_string()))
        }
    }
}

/// Extract per-predicate witness formulas from a model. Returns `None` when
/// any definition falls outside the supported fragment.
fn parse_model(text: &str, preds: &[PredInfo]) -> Option<WitnessFormula> {
    let sexps = parse_sexps(text)?;
    let mut defs: BTreeMap<String, (Vec<String>, Sexp)> = BTreeMap::new();
    collect_define_funs(&sexps, &mut defs);

    let mut w = WitnessFormula::default();
    for pred in preds {
        let Some((params, body)) = defs.get(&pred.name) else {
            continue;
        };
        // Positional mapping from solver parameter names to program vars;
        // extended-pair layouts are outside the converted fragment.
        let mut mapping = BTreeMap::new();
        let mut names = params.iter();
        for (var, layout) in &pred.params {
            match layout {
                ParamLayout::Plain(_) => {
                    mapping.insert(names.next()?.clone(), var.clone());
                }
                ParamLayout::Ext => return None,
            }
        }
        let formula = sexp_to_expr(body, &mapping, &BTreeMap::new())?;
        w.per_loop.insert(pred.point, WitnessEntry::plain(formula));
    }
    if w.per_loop.is_empty() {
        None
    } else {
        Some(w)
    }
}

fn collect_define_funs(sexps: &[Sexp], out: &mut BTreeMap<String, (Vec<String>, Sexp)>) {
    for s in sexps {
        if let Sexp::List(items) = s {
            if let [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(params), _sort, body] =
                items.as_slice()
            {
                if kw == "define-fun" {
                    let names: Vec<String> = params
                        .iter()
                        .filter_map(|p| match p {
                            Sexp::List(pair) => match pair.as_slice() {
                                [Sexp::Atom(n), _] => Some(n.clone()),
                                _ => None,
                            },
                            _ => None,
                        })
                        .collect();
                    out.insert(name.clone(), (names, body.clone()));
                    continue;
                }
            }
            collect_define_funs(items, out);
        }
    }
}

/// Convert a model body into a core expression. `mapping` renames solver
/// parameters to program variables; `lets` carries let-bindings.
fn sexp_to_expr(
    s: &Sexp,
    mapping: &BTreeMap<String, String>,
    lets: &BTreeMap<String, Expr>,
) -> Option<Expr> {
    match s {
        Sexp::Atom(a) => {
            if a == "true" {
                return Some(Expr::BoolLit(true));
            }
            if a == "false" {
                return Some(Expr::BoolLit(false));
            }
            if let Ok(n) = a.parse::<BigInt>() {
                return Some(Expr::IntLit(n));
            }
            if let Some(e) = lets.get(a) {
                return Some(e.clone());
            }
            Some(Expr::var(mapping.get(a).cloned().unwrap_or_else(|| a.clone())))
        }
        Sexp::List(items) => {
            let (head, args) = items.split_first()?;
            let Sexp::Atom(op) = head else {
                return None;
            };
            if op == "let" {
                let [Sexp::List(bindings), body] = args else {
                    return None;
                };
                let mut lets = lets.clone();
                for b in bindings {
                    let Sexp::List(pair) = b else { return None };
                    let [Sexp::Atom(name), value] = pair.as_slice() else {
                        return None;
                    };
                    let e = sexp_to_expr(value, mapping, &lets)?;
                    lets.insert(name.clone(), e);
                }
                return sexp_to_expr(body, mapping, &lets);
            }
            let conv: Option<Vec<Expr>> = args
                .iter()
                .map(|a| sexp_to_expr(a, mapping, lets))
                .collect();
            let mut conv = conv?;
            let binary_chain = |mut args: Vec<Expr>, f: fn(Expr, Expr) -> Expr| -> Option<Expr> {
                let first = args.drain(..1).next()?;
                Some(args.into_iter().fold(first, f))
            };
            match (op.as_str(), conv.len()) {
                ("and", _) => binary_chain(conv, Expr::and),
                ("or", _) => binary_chain(conv, Expr::or),
                ("not", 1) => Some(Expr::not(conv.remove(0))),
                ("=>", 2) => {
                    let r = conv.remove(1);
                    let l = conv.remove(0);
                    Some(Expr::or(Expr::not(l), r))
                }
                ("=", 2) => {
                    let r = conv.remove(1);
                    let l = conv.remove(0);
                    Some(Expr::eq(l, r))
                }
                ("<=", 2) => {
                    let r = conv.remove(1);
                    let l = conv.remove(0);
                    Some(Expr::leq(l, r))
                }
                ("<", 2) => {
                    let r = conv.remove(1);
                    let l = conv.remove(0);
                    Some(Expr::lt(l, r))
                }
                (">=", 2) => {
                    let r = conv.remove(1);
                    let l = conv.remove(0);
                    Some(Expr::geq(l, r))
                }
                (">", 2) => {
                    let r = conv.remove(1);
                    let l = conv.remove(0);
                    Some(Expr::gt(l, r))
                }
                ("+", _) => binary_chain(conv, Expr::add),
                ("*", _) => binary_chain(conv, Expr::mul),
                ("-", 1) => Some(Expr::sub(Expr::int(0), conv.remove(0))),
                ("-", 2) => {
                    let r = conv.remove(1);
                    let l = conv.remove(0);
                    Some(Expr::sub(l, r))
                }
                ("div", 2) => {
                    let r = conv.remove(1);
                    let l = conv.remove(0);
                    Some(Expr::div(l, r))
                }
                ("ite", 3) => {
                    let e = conv.remove(2);
                    let t = conv.remove(1);
                    let c = conv.remove(0);
                    Some(Expr::ite(c, t, e))
                }
                ("select", 2) => {
                    let i = conv.remove(1);
                    let a = conv.remove(0);
                    Some(Expr::select(a, i))
                }
                ("store", 3) => {
                    let x = conv.remove(2);
                    let i = conv.remove(1);
                    let a = conv.remove(0);
                    Some(Expr::store(a, i, x))
                }
                _ => None,
            }
        }
    }
}
