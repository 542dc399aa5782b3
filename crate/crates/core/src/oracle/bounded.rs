//! Bounded exhaustive checking: enumerate every nondeterministic draw over
//! finite per-site intervals and replay the program.
//!
//! A failing assertion yields `Incorrect` with a recorded trace. `Correct`
//! is returned only when every path terminated or blocked and the
//! enumeration was exhaustive; runtime errors, budget exhaustion, or hitting
//! the path cap degrade the verdict to `Unknown`.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use crate::ast::{ControlPointId, Program, TypeExpr};
use crate::error::OracleError;
use crate::eval::{run, EvalErrorKind, Nondet, RunOutcome};
use crate::oracle::{Oracle, OracleBudget, OracleVerdict};
use crate::value::Value;

#[derive(Debug, Clone)]
pub struct BoundedDomain {
    /// Interval for integer nondet sites without a specific entry.
    pub default_range: (i64, i64),
    /// Per-site intervals, keyed by the control point of the statement
    /// containing the `nondet`.
    pub site_ranges: BTreeMap<ControlPointId, (i64, i64)>,
    /// Step budget per replay.
    pub step_budget: u64,
    /// Cap on the number of enumerated paths.
    pub max_paths: u64,
    /// When false, the oracle never reports `Correct` (the enumeration is
    /// declared non-exhaustive up front).
    pub exhaustive: bool,
}

impl Default for BoundedDomain {
    fn default() -> Self {
        BoundedDomain {
            default_range: (-3, 3),
            site_ranges: BTreeMap::new(),
            step_budget: 10_000,
            max_paths: 1_000_000,
            exhaustive: true,
        }
    }
}

impl BoundedDomain {
    pub fn range_for(&self, site: ControlPointId) -> (i64, i64) {
        self.site_ranges
            .get(&site)
            .copied()
            .unwrap_or(self.default_range)
    }

    /// Control points of statements whose own expression contains `nondet`,
    /// in pre-order; used to address sites by ordinal.
    pub fn nondet_sites(p: &Program) -> Vec<ControlPointId> {
        use crate::ast::{visit_children, Expr, StmtKind};
        let mut sites = Vec::new();
        p.body.visit(&mut |s| {
            let own: Option<&Expr> = match &s.kind {
                StmtKind::Decl { rhs, .. } => rhs.as_ref(),
                StmtKind::Assign { rhs, .. } => Some(rhs),
                StmtKind::Assert(e) | StmtKind::Assume(e) => Some(e),
                StmtKind::While { cond, .. } | StmtKind::If { cond, .. } => Some(cond),
                _ => None,
            };
            let Some(own) = own else { return };
            let mut has = false;
            let mut stack = vec![own];
            while let Some(e) = stack.pop() {
                if matches!(e, Expr::Nondet(_)) {
                    has = true;
                }
                visit_children(e, &mut |c| stack.push(c));
            }
            if has {
                sites.push(s.id);
            }
        });
        sites
    }
}

/// One recorded draw during enumeration.
#[derive(Debug, Clone)]
struct Draw {
    site: ControlPointId,
    value: Value,
    is_bool: bool,
}

/// Nondet source that replays a prefix of draws and extends it with the
/// minimum of each site's interval, recording what it drew.
struct EnumSource<'a> {
    dom: &'a BoundedDomain,
    prefix: &'a [Draw],
    pos: usize,
    extension: Vec<Draw>,
    unsupported: bool,
}

impl<'a> Nondet for EnumSource<'a> {
    fn draw(&mut self, ty: &TypeExpr, site: ControlPointId) -> Result<Value, EvalErrorKind> {
        if self.pos < self.prefix.len() {
            let v = self.prefix[self.pos].value.clone();
            self.pos += 1;
            return Ok(v);
        }
        let draw = match ty {
            TypeExpr::Int => {
                let (lo, _) = self.dom.range_for(site);
                Draw {
                    site,
                    value: Value::int(lo),
                    is_bool: false,
                }
            }
            TypeExpr::Bool => Draw {
                site,
                value: Value::Bool(false),
                is_bool: true,
            },
            TypeExpr::Array(_) => {
                self.unsupported = true;
                return Err(EvalErrorKind::UnsupportedNondet(ty.to_string()));
            }
        };
        let v = draw.value.clone();
        self.extension.push(draw);
        Ok(v)
    }
}

/// A scripted source over recorded draws (for the final recorded replay).
struct ScriptSource<'a> {
    script: &'a [Draw],
    pos: usize,
}

impl<'a> Nondet for ScriptSource<'a> {
    fn draw(&mut self, _ty: &TypeExpr, _site: ControlPointId) -> Result<Value, EvalErrorKind> {
        let v = self
            .script
            .get(self.pos)
            .ok_or(EvalErrorKind::NondetExhausted)?
            .value
            .clone();
        self.pos += 1;
        Ok(v)
    }
}

pub fn check_bounded(p: &Program, dom: &BoundedDomain) -> OracleVerdict {
    let mut script: Vec<Draw> = Vec::new();
    let mut paths: u64 = 0;
    let mut unknown: Option<String> = None;

    loop {
        if paths >= dom.max_paths {
            return OracleVerdict::Unknown {
                reason: format!("path cap {} reached", dom.max_paths),
            };
        }
        paths += 1;

        let mut source = EnumSource {
            dom,
            prefix: &script,
            pos: 0,
            extension: Vec::new(),
            unsupported: false,
        };
        let result = run(p, &mut source, dom.step_budget, false);
        let extension = source.extension;
        let unsupported = source.unsupported;
        let mut full: Vec<Draw> = script.clone();
        full.extend(extension);

        match result.outcome {
            RunOutcome::AssertFailed { point } => {
                // Replay with recording to produce the trace.
                let mut replay = ScriptSource {
                    script: &full,
                    pos: 0,
                };
                let recorded = run(p, &mut replay, dom.step_budget, true);
                debug_assert!(matches!(
                    recorded.outcome,
                    RunOutcome::AssertFailed { point: q } if q == point
                ));
                return OracleVerdict::Incorrect {
                    trace: recorded.trace,
                };
            }
            RunOutcome::Terminated(_) | RunOutcome::Blocked { .. } => {}
            RunOutcome::BudgetExceeded => {
                unknown.get_or_insert_with(|| "step budget exceeded on some path".to_string());
            }
            RunOutcome::RuntimeError { kind, point } => {
                if unsupported {
                    return OracleVerdict::Unknown {
                        reason: "nondet over arrays is not enumerable".to_string(),
                    };
                }
                unknown.get_or_insert_with(|| format!("runtime error {kind} at {point}"));
            }
        }

        // Backtrack: bump the last draw that still has headroom.
        script = full;
        loop {
            match script.pop() {
                None => {
                    // Enumeration complete.
                    return match unknown {
                        Some(reason) => OracleVerdict::Unknown { reason },
                        None if dom.exhaustive => OracleVerdict::Correct { witness: None },
                        None => OracleVerdict::Unknown {
                            reason: "enumeration declared non-exhaustive".to_string(),
                        },
                    };
                }
                Some(d) if d.is_bool => {
                    if d.value == Value::Bool(false) {
                        script.push(Draw {
                            value: Value::Bool(true),
                            ..d
                        });
                        break;
                    }
                }
                Some(d) => {
                    let (_, hi) = dom.range_for(d.site);
                    let cur = d.value.as_int().expect("int draw");
                    if cur < &BigInt::from(hi) {
                        script.push(Draw {
                            value: Value::Int(cur + 1),
                            ..d
                        });
                        break;
                    }
                }
            }
        }
    }
}

/// The bounded checker as a search oracle; budget escalation doubles the
/// step budget and path cap.
pub struct BoundedOracle {
    pub dom: BoundedDomain,
}

impl Oracle for BoundedOracle {
    fn check(&self, p: &Program, budget: OracleBudget) -> Result<OracleVerdict, OracleError> {
        let mut dom = self.dom.clone();
        dom.step_budget = budget.scale(dom.step_budget);
        dom.max_paths = budget.scale(dom.max_paths);
        Ok(check_bounded(p, &dom))
    }

    fn name(&self) -> &'static str {
        "bounded"
    }
}
