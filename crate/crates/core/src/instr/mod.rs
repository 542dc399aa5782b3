//! Instrumentation operators: ghost variables with initial values, rewrite
//! rules over schematic assignments, and an instrumentation invariant that
//! holds in every reachable state of every instrumented program.

pub mod builders;
pub mod conditions;
pub mod matching;
pub mod opfile;
pub mod space;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ast::*;
use crate::monoid::AggregatorSpec;

/// A ghost variable with its declared type and initial value expression
/// (a literal or `const(literal)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GhostDecl {
    pub name: String,
    pub ty: TypeExpr,
    pub init: Expr,
}

impl GhostDecl {
    pub fn new(name: impl Into<String>, ty: TypeExpr, init: Expr) -> GhostDecl {
        GhostDecl {
            name: name.into(),
            ty,
            init,
        }
    }
}

/// A schematic rewrite rule `r = t ⇝ s`. The pattern left-hand side is a
/// meta-variable ranging over program variables; the template is a statement
/// sequence over ghost variables and the pattern's meta-variables, assigning
/// only to the matched left-hand side and ghosts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    pub id: String,
    /// Name of the left-hand-side meta-variable (without `$`).
    pub lhs_meta: String,
    /// Schematic right-hand side.
    pub pattern: Expr,
    /// Schematic replacement; assignments to `$<lhs_meta>` stand for the
    /// original assignment.
    pub template: Vec<Stmt>,
}

/// How condition-checking samples ghost states satisfying the invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum StateGen {
    /// Interval-tracking operators: lo/hi bounds, value ghosts computed by
    /// folding the aggregator over a random shadow array.
    Aggregation {
        lo: String,
        hi: String,
        array: String,
        /// Auxiliary nonzero-shadow array, when present.
        nz_array: Option<String>,
        value_vars: Vec<String>,
        agg: AggregatorSpec,
    },
    /// `x_sq = x_shad²` style.
    SquarePair { sq: String, shad: String },
    /// Rejection sampling against the invariant.
    Rejection,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstrumentationOperator {
    pub name: String,
    pub ghosts: Vec<GhostDecl>,
    pub rules: Vec<RewriteRule>,
    pub invariant: Expr,
    /// Source aggregator metadata, when the operator was built from one.
    pub aggregator: Option<AggregatorSpec>,
    pub state_gen: StateGen,
}

impl InstrumentationOperator {
    pub fn ghost_names(&self) -> BTreeSet<String> {
        self.ghosts.iter().map(|g| g.name.clone()).collect()
    }

    pub fn rule(&self, id: &str) -> Option<&RewriteRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Rename ghost variables throughout the operator.
    pub fn rename_ghosts(&self, renaming: &BTreeMap<String, String>) -> InstrumentationOperator {
        let subst: BTreeMap<String, Expr> = renaming
            .iter()
            .map(|(k, v)| (k.clone(), Expr::var(v.clone())))
            .collect();
        let rename = |n: &str| renaming.get(n).cloned().unwrap_or_else(|| n.to_string());
        InstrumentationOperator {
            name: self.name.clone(),
            ghosts: self
                .ghosts
                .iter()
                .map(|g| GhostDecl::new(rename(&g.name), g.ty.clone(), g.init.clone()))
                .collect(),
            rules: self
                .rules
                .iter()
                .map(|r| RewriteRule {
                    id: r.id.clone(),
                    lhs_meta: r.lhs_meta.clone(),
                    pattern: subst_vars(&r.pattern, &subst),
                    template: r
                        .template
                        .iter()
                        .map(|s| rename_stmt_vars(s, renaming, &subst))
                        .collect(),
                })
                .collect(),
            invariant: subst_vars(&self.invariant, &subst),
            aggregator: self.aggregator.clone(),
            state_gen: match &self.state_gen {
                StateGen::Aggregation {
                    lo,
                    hi,
                    array,
                    nz_array,
                    value_vars,
                    agg,
                } => StateGen::Aggregation {
                    lo: rename(lo),
                    hi: rename(hi),
                    array: rename(array),
                    nz_array: nz_array.as_deref().map(rename),
                    value_vars: value_vars.iter().map(|v| rename(v)).collect(),
                    agg: agg.clone(),
                },
                StateGen::SquarePair { sq, shad } => StateGen::SquarePair {
                    sq: rename(sq),
                    shad: rename(shad),
                },
                StateGen::Rejection => StateGen::Rejection,
            },
        }
    }
}

fn rename_stmt_vars(
    s: &Stmt,
    renaming: &BTreeMap<String, String>,
    subst: &BTreeMap<String, Expr>,
) -> Stmt {
    let rename = |n: &str| renaming.get(n).cloned().unwrap_or_else(|| n.to_string());
    let kind = match &s.kind {
        StmtKind::Skip => StmtKind::Skip,
        StmtKind::Decl { name, ty, rhs } => StmtKind::Decl {
            name: rename(name),
            ty: ty.clone(),
            rhs: rhs.as_ref().map(|e| subst_vars(e, subst)),
        },
        StmtKind::Assign { lhs, rhs } => StmtKind::Assign {
            lhs: rename(lhs),
            rhs: subst_vars(rhs, subst),
        },
        StmtKind::Block(ss) => StmtKind::Block(
            ss.iter()
                .map(|s| rename_stmt_vars(s, renaming, subst))
                .collect(),
        ),
        StmtKind::While { cond, body } => StmtKind::While {
            cond: subst_vars(cond, subst),
            body: Box::new(rename_stmt_vars(body, renaming, subst)),
        },
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => StmtKind::If {
            cond: subst_vars(cond, subst),
            then_branch: Box::new(rename_stmt_vars(then_branch, renaming, subst)),
            else_branch: Box::new(rename_stmt_vars(else_branch, renaming, subst)),
        },
        StmtKind::Assert(e) => StmtKind::Assert(subst_vars(e, subst)),
        StmtKind::Assume(e) => StmtKind::Assume(subst_vars(e, subst)),
    };
    Stmt {
        id: s.id,
        kind,
    }
}

/// The state binding each ghost variable to its initial value.
pub fn initial_ghost_state(
    op: &InstrumentationOperator,
) -> Result<crate::value::State, crate::eval::EvalErrorKind> {
    let mut state = crate::value::State::new();
    for g in &op.ghosts {
        let v = crate::eval::eval_expr_pure(&g.init, &state)?;
        state.set(g.name.clone(), v);
    }
    Ok(state)
}

/// Compose two operators: ghost sets are made disjoint by renaming the
/// second operator's clashing ghosts, rule ids are kept distinct, and the
/// invariants are conjoined.
pub fn compose(
    o1: &InstrumentationOperator,
    o2: &InstrumentationOperator,
) -> InstrumentationOperator {
    let mut taken: BTreeSet<String> = o1.ghost_names();
    let mut renaming = BTreeMap::new();
    let mut counter = 1u32;
    for g in &o2.ghosts {
        if taken.contains(&g.name) {
            let fresh = loop {
                counter += 1;
                let candidate = format!("{}${counter}", g.name);
                if !taken.contains(&candidate) {
                    break candidate;
                }
            };
            taken.insert(fresh.clone());
            renaming.insert(g.name.clone(), fresh);
        } else {
            taken.insert(g.name.clone());
        }
    }
    let o2 = if renaming.is_empty() {
        o2.clone()
    } else {
        o2.rename_ghosts(&renaming)
    };

    let mut rules = o1.rules.clone();
    let existing: BTreeSet<String> = rules.iter().map(|r| r.id.clone()).collect();
    for r in &o2.rules {
        let mut r = r.clone();
        if existing.contains(&r.id) {
            r.id = format!("{}#2", r.id);
            let mut k = 2;
            while rules.iter().any(|x| x.id == r.id) {
                k += 1;
                r.id = format!("{}#{k}", r.id.trim_end_matches(char::is_numeric).trim_end_matches('#'));
            }
        }
        rules.push(r);
    }

    let mut ghosts = o1.ghosts.clone();
    ghosts.extend(o2.ghosts.iter().cloned());
    InstrumentationOperator {
        name: format!("{}+{}", o1.name, o2.name),
        ghosts,
        rules,
        invariant: Expr::and(o1.invariant.clone(), o2.invariant.clone()),
        aggregator: None,
        state_gen: StateGen::Rejection,
    }
}

/// A choice of rewrite rule (or `⊥` = leave unchanged) for every matchable
/// control point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selection {
    pub choices: BTreeMap<ControlPointId, Option<String>>,
}

impl Selection {
    pub fn rewrite_count(&self) -> usize {
        self.choices.values().filter(|c| c.is_some()).count()
    }

    pub fn get(&self, p: ControlPointId) -> Option<&Option<String>> {
        self.choices.get(&p)
    }

    /// JSON form: `{"<point>": "<ruleId>" | "bot", ...}`.
    pub fn to_json(&self) -> serde_json::Value {
        let map: BTreeMap<String, String> = self
            .choices
            .iter()
            .map(|(p, c)| {
                (
                    p.0.to_string(),
                    c.clone().unwrap_or_else(|| "bot".to_string()),
                )
            })
            .collect();
        serde_json::to_value(map).expect("selection serialization")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Selection, String> {
        let map: BTreeMap<String, String> =
            serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
        let mut choices = BTreeMap::new();
        for (k, val) in map {
            let point: u32 = k.parse().map_err(|_| format!("bad point id `{k}`"))?;
            let choice = if val == "bot" { None } else { Some(val) };
            choices.insert(ControlPointId(point), choice);
        }
        Ok(Selection { choices })
    }
}

impl std::fmt::Display for Selection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .choices
            .iter()
            .map(|(p, c)| format!("{p}:{}", c.as_deref().unwrap_or("⊥")))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Result of applying an operator under a selection.
#[derive(Debug, Clone)]
pub struct InstrumentedProgram {
    pub program: Program,
    /// Original control point -> corresponding point in the instrumented
    /// program (for rewritten assignments: the statement after which the
    /// assigned variable holds its new value).
    pub point_map: BTreeMap<ControlPointId, ControlPointId>,
    /// Instrumented point -> the original point it derives from (covers
    /// every statement generated by a rewrite).
    pub origin: BTreeMap<ControlPointId, ControlPointId>,
    /// Assertions added by instrumentation.
    pub added_asserts: BTreeSet<ControlPointId>,
    /// Final statement of each rewrite block. The instrumentation invariant
    /// is guaranteed between blocks, not inside them.
    pub block_ends: BTreeSet<ControlPointId>,
    pub selection: Selection,
    pub operator: InstrumentationOperator,
    /// Names added to the vocabulary (ghosts and fresh temporaries).
    pub ghost_vocab: BTreeSet<String>,
}

impl InstrumentedProgram {
    /// Is `point` (in the instrumented program) the image of an original,
    /// non-added assertion?
    pub fn is_original_assert(&self, point: ControlPointId) -> bool {
        !self.added_asserts.contains(&point) && self.original_point(point).is_some()
    }

    /// Preimage under `point_map`.
    pub fn original_point(&self, point: ControlPointId) -> Option<ControlPointId> {
        self.point_map
            .iter()
            .find(|(_, v)| **v == point)
            .map(|(k, _)| *k)
    }

    /// The original point a statement of the instrumented program derives
    /// from: itself-preimaged for copied statements, the rewritten point for
    /// generated ones.
    pub fn origin_of(&self, point: ControlPointId) -> Option<ControlPointId> {
        self.origin
            .get(&point)
            .copied()
            .or_else(|| self.original_point(point))
    }

    pub fn point_map_json(&self) -> serde_json::Value {
        let points: BTreeMap<String, u32> = self
            .point_map
            .iter()
            .map(|(k, v)| (k.0.to_string(), v.0))
            .collect();
        let added: Vec<u32> = self.added_asserts.iter().map(|p| p.0).collect();
        serde_json::json!({ "points": points, "addedAsserts": added })
    }
}

/// Serializable description of an instrumentation space (for `--list-space`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDescription {
    pub points: Vec<u32>,
    pub choices: BTreeMap<String, Vec<String>>,
    pub size: u64,
}
