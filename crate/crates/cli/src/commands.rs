//! Command implementations.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Duration;

use instrumenta_core::ast::{ControlPointId, Program, StmtKind};
use instrumenta_core::eval::{run, trace_to_jsonl, NondetSource, RunOutcome, Trace};
use instrumenta_core::instr::conditions::{check_operator_conditions, CondCheckConfig, ConditionStatus};
use instrumenta_core::instr::space::{instrument, instrumentation_space};
use instrumenta_core::instr::{opfile, Selection};
use instrumenta_core::normalize::normalize;
use instrumenta_core::oracle::chc::encode_chc;
use instrumenta_core::oracle::solver::{AutoOracle, ChcOracle, SOLVER_ENV};
use instrumenta_core::oracle::witness::WitnessFormula;
use instrumenta_core::oracle::{BoundedDomain, BoundedOracle, Oracle};
use instrumenta_core::parser::parse;
use instrumenta_core::search::{search, PickStrategy, SearchConfig, SearchResult};
use instrumenta_core::typecheck::typecheck;

use crate::{CheckArgs, CheckOperatorArgs, ExportArgs, InstrumentArgs, OracleArgs, RunArgs};

type CmdResult = Result<ExitCode, String>;

fn load_program(path: &std::path::Path) -> Result<Program, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let parsed = parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let typed = typecheck(&parsed).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        lines.join("\n")
    })?;
    Ok(normalize(&typed))
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("bad range `{s}`, expected lo:hi"))?;
    let lo: i64 = lo.parse().map_err(|_| format!("bad range `{s}`"))?;
    let hi: i64 = hi.parse().map_err(|_| format!("bad range `{s}`"))?;
    if lo > hi {
        return Err(format!("empty range `{s}`"));
    }
    Ok((lo, hi))
}

fn bounded_domain(args: &OracleArgs, p: &Program) -> Result<BoundedDomain, String> {
    let default_range = parse_range(&args.nondet_range)?;
    let sites = BoundedDomain::nondet_sites(p);
    let mut site_ranges = BTreeMap::new();
    for spec in &args.site_ranges {
        let (ordinal, range) = spec
            .split_once('=')
            .ok_or_else(|| format!("bad site range `{spec}`, expected k=lo:hi"))?;
        let ordinal: usize = ordinal.parse().map_err(|_| format!("bad site `{spec}`"))?;
        let point = sites
            .get(ordinal)
            .ok_or_else(|| format!("no nondet site with ordinal {ordinal}"))?;
        site_ranges.insert(*point, parse_range(range)?);
    }
    Ok(BoundedDomain {
        default_range,
        site_ranges,
        step_budget: args.step_budget,
        max_paths: args.max_paths,
        exhaustive: true,
    })
}

fn make_oracle(args: &OracleArgs, p: &Program) -> Result<Box<dyn Oracle>, String> {
    let solver_cmd = args
        .solver_cmd
        .clone()
        .or_else(|| std::env::var(SOLVER_ENV).ok());
    let timeout = Duration::from_secs(args.timeout);
    match args.oracle.as_str() {
        "bounded" => Ok(Box::new(BoundedOracle {
            dom: bounded_domain(args, p)?,
        })),
        "chc" => {
            let cmd = solver_cmd.ok_or_else(|| {
                format!("oracle `chc` needs --solver-cmd or ${SOLVER_ENV}")
            })?;
            let mut oracle = ChcOracle::new(cmd, timeout);
            oracle.replay_dom = Some(bounded_domain(args, p)?);
            Ok(Box::new(oracle))
        }
        "auto" => {
            let chc = solver_cmd.map(|cmd| {
                let mut oracle = ChcOracle::new(cmd, timeout);
                oracle.replay_dom = bounded_domain(args, p).ok();
                oracle
            });
            Ok(Box::new(AutoOracle {
                bounded: BoundedOracle {
                    dom: bounded_domain(args, p)?,
                },
                chc,
            }))
        }
        other => Err(format!("unknown oracle `{other}`")),
    }
}

fn witness_json(w: &WitnessFormula) -> serde_json::Value {
    let map: BTreeMap<String, serde_json::Value> = w
        .per_loop
        .iter()
        .map(|(point, entry)| {
            (
                point.0.to_string(),
                serde_json::json!({
                    "exists": entry.exists_vars,
                    "formula": instrumenta_core::pretty::pretty_expr(&entry.formula),
                }),
            )
        })
        .collect();
    serde_json::to_value(map).expect("witness serialization")
}

fn trace_json(t: &Trace) -> serde_json::Value {
    let steps: Vec<serde_json::Value> = t
        .iter()
        .enumerate()
        .map(|(k, step)| {
            serde_json::json!({
                "step": k,
                "point": step.point.0,
                "vars": step.state,
            })
        })
        .collect();
    serde_json::Value::Array(steps)
}

pub fn cmd_check(args: CheckArgs) -> CmdResult {
    let p = load_program(&args.input)?;
    let op = crate::opset::resolve(&args.operators.ops, &args.operators.op_files, &p)?;
    let oracle = make_oracle(&args.oracle, &p)?;
    let cfg = SearchConfig {
        strategy: match args.strategy.as_str() {
            "lex" => PickStrategy::Lex,
            _ => PickStrategy::AllFirst,
        },
        max_budget_doublings: args.max_redoublings,
        max_operator_instances: args.max_operators,
        jobs: args.jobs,
        ..Default::default()
    };
    let outcome = search(&p, &op, oracle.as_ref(), &cfg).map_err(|e| e.to_string())?;
    if args.progress {
        for record in &outcome.progress {
            eprintln!("{}", serde_json::to_string(record).expect("progress record"));
        }
    }

    let json_mode = args.format == "json";
    match &outcome.result {
        SearchResult::Verified { selection, witness } => {
            if json_mode {
                let payload = serde_json::json!({
                    "result": "verified",
                    "selection": selection.to_json(),
                    "iterations": outcome.iterations,
                    "operatorInstances": outcome.operator_instances,
                    "witness": witness.as_ref().map(witness_json),
                });
                println!("{payload}");
            } else {
                println!("Verified with selection {selection}");
                println!("iterations: {}", outcome.iterations);
                if let Some(w) = witness {
                    println!("witness (over program variables):\n{w}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        SearchResult::Incorrect { trace } => {
            if json_mode {
                let payload = serde_json::json!({
                    "result": "incorrect",
                    "iterations": outcome.iterations,
                    "trace": trace_json(trace),
                });
                println!("{payload}");
            } else {
                println!("Incorrect: an assertion can fail. Counterexample trace:");
                print!("{}", trace_to_jsonl(trace));
            }
            Ok(ExitCode::from(1))
        }
        SearchResult::Inconclusive => {
            if json_mode {
                let payload = serde_json::json!({
                    "result": "inconclusive",
                    "iterations": outcome.iterations,
                });
                println!("{payload}");
            } else {
                println!(
                    "Inconclusive after {} iterations (space exhausted or budget reached)",
                    outcome.iterations
                );
            }
            Ok(ExitCode::from(2))
        }
    }
}

pub fn cmd_instrument(args: InstrumentArgs) -> CmdResult {
    let p = load_program(&args.input)?;
    let op = crate::opset::resolve(&args.operators.ops, &args.operators.op_files, &p)?;
    let space = instrumentation_space(&p, &op);

    if args.list_space {
        let desc = space.describe();
        println!("{}", serde_json::to_string_pretty(&desc).expect("space description"));
        return Ok(ExitCode::SUCCESS);
    }

    let selection = match &args.selection {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            Selection::from_json(&value)?
        }
        None => space.full_selection(),
    };
    let ip = instrument(&p, &op, &selection, true).map_err(|e| e.to_string())?;
    let text = instrumenta_core::pretty::pretty_print(&ip.program);
    match &args.output {
        Some(path) => std::fs::write(path, text).map_err(|e| e.to_string())?,
        None => print!("{text}"),
    }
    if let Some(path) = &args.point_map {
        let payload = ip.point_map_json();
        std::fs::write(path, serde_json::to_string_pretty(&payload).expect("point map"))
            .map_err(|e| e.to_string())?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_run(args: RunArgs) -> CmdResult {
    let p = load_program(&args.input)?;
    let mut nd: Box<dyn instrumenta_core::eval::Nondet> = if !args.script.is_empty() {
        build_script_source(&args.script, &p)?
    } else if let Some(seed) = args.seed {
        let (lo, hi) = parse_range(&args.nondet_range)?;
        Box::new(NondetSource::seeded(seed, lo, hi))
    } else {
        Box::new(NondetSource::scripted(vec![]))
    };
    let res = run(&p, nd.as_mut(), args.budget, true);
    print!("{}", trace_to_jsonl(&res.trace));
    match res.outcome {
        RunOutcome::Terminated(_) => {
            eprintln!("Terminated");
            Ok(ExitCode::SUCCESS)
        }
        RunOutcome::Blocked { point } => {
            eprintln!("Blocked at {point}");
            Ok(ExitCode::SUCCESS)
        }
        RunOutcome::AssertFailed { point } => {
            eprintln!("AssertFailed at {point}");
            Ok(ExitCode::from(1))
        }
        RunOutcome::BudgetExceeded => {
            eprintln!("BudgetExceeded");
            Ok(ExitCode::from(2))
        }
        RunOutcome::RuntimeError { kind, point } => {
            eprintln!("RuntimeError at {point}: {kind}");
            Ok(ExitCode::from(2))
        }
    }
}

/// A nondet source from `--script` arguments: positional `v1,v2,...` lists
/// or `name=value` pairs bound to declared nondet variables.
fn build_script_source(
    specs: &[String],
    p: &Program,
) -> Result<Box<dyn instrumenta_core::eval::Nondet>, String> {
    let mut positional: Vec<instrumenta_core::value::Value> = Vec::new();
    let mut named: BTreeMap<ControlPointId, i64> = BTreeMap::new();

    // Declared nondet variables, by name.
    let mut decl_sites: BTreeMap<String, ControlPointId> = BTreeMap::new();
    p.body.visit(&mut |s| {
        if let StmtKind::Decl { name, rhs: Some(e), .. } = &s.kind {
            if matches!(e, instrumenta_core::ast::Expr::Nondet(_)) {
                decl_sites.insert(name.clone(), s.id);
            }
        }
    });

    for spec in specs {
        for part in spec.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            if let Some((name, value)) = part.split_once('=') {
                let point = decl_sites.get(name.trim()).ok_or_else(|| {
                    format!("`{name}` is not a variable declared from nondet")
                })?;
                let v: i64 = value
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad script value `{value}`"))?;
                named.insert(*point, v);
            } else {
                let v: i64 = part.parse().map_err(|_| format!("bad script value `{part}`"))?;
                positional.push(instrumenta_core::value::Value::int(v));
            }
        }
    }

    if !named.is_empty() {
        struct NamedSource {
            by_site: BTreeMap<ControlPointId, i64>,
            rest: std::vec::IntoIter<instrumenta_core::value::Value>,
        }
        impl instrumenta_core::eval::Nondet for NamedSource {
            fn draw(
                &mut self,
                ty: &instrumenta_core::ast::TypeExpr,
                site: ControlPointId,
            ) -> Result<instrumenta_core::value::Value, instrumenta_core::eval::EvalErrorKind>
            {
                if let Some(v) = self.by_site.get(&site) {
                    return Ok(instrumenta_core::value::Value::int(*v));
                }
                self.rest
                    .next()
                    .ok_or(instrumenta_core::eval::EvalErrorKind::NondetExhausted)
                    .and_then(|v| match ty {
                        instrumenta_core::ast::TypeExpr::Array(_) => Err(
                            instrumenta_core::eval::EvalErrorKind::UnsupportedNondet(
                                ty.to_string(),
                            ),
                        ),
                        _ => Ok(v),
                    })
            }
        }
        Ok(Box::new(NamedSource {
            by_site: named,
            rest: positional.into_iter(),
        }))
    } else {
        Ok(Box::new(NondetSource::scripted(positional)))
    }
}

pub fn cmd_export_chc(args: ExportArgs) -> CmdResult {
    let p = load_program(&args.input)?;
    let script = encode_chc(&p).map_err(|e| e.to_string())?;
    match &args.output {
        Some(path) => std::fs::write(path, &script.text).map_err(|e| e.to_string())?,
        None => print!("{}", script.text),
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_check_operator(args: CheckOperatorArgs) -> CmdResult {
    let op = if args.operator.ends_with(".toml") || args.operator.contains('/') {
        let text = std::fs::read_to_string(&args.operator)
            .map_err(|e| format!("{}: {e}", args.operator))?;
        opfile::load_operator(&text).map_err(|e| e.to_string())?
    } else {
        // Builtin names; predicate-parameterized ones get a generic witness
        // predicate for condition checking.
        let pred = instrumenta_core::ast::LambdaPred::new(
            "x",
            "i",
            instrumenta_core::ast::Expr::eq(
                instrumenta_core::ast::Expr::var("x"),
                instrumenta_core::ast::Expr::var("i"),
            ),
        );
        instrumenta_core::instr::builders::builtin_operator(&args.operator, Some(&pred))
            .map_err(|e| e.to_string())?
    };
    let cfg = CondCheckConfig {
        samples: args.samples,
        int_range: (-8, 8),
        seed: args.seed,
    };
    println!("operator `{}`; samples = {}, seed = {}", op.name, cfg.samples, cfg.seed);
    let report = check_operator_conditions(&op, &cfg);
    let mut ok = true;
    for r in &report.results {
        match &r.status {
            ConditionStatus::Pass => {
                println!("condition {}: pass ({} samples)", r.condition, r.samples)
            }
            ConditionStatus::Fail { counterexample } => {
                ok = false;
                println!("condition {}: FAIL — {counterexample}", r.condition);
            }
            ConditionStatus::Skipped { reason } => {
                ok = false;
                println!("condition {}: SKIPPED — {reason}", r.condition);
            }
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
