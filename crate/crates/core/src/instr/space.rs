//! The instrumentation space of a program under an operator, and the
//! application of a selection: ghost initialization is prepended, selected
//! assignment statements are rewritten, and fresh left-hand sides are
//! introduced where an assignment's target occurs in its right-hand side.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::error::InstrError;
use crate::instr::matching::{match_rule, subst_template_stmt};
use crate::instr::{
    InstrumentationOperator, InstrumentedProgram, RewriteRule, Selection, SpaceDescription,
};

/// The matchable control points `C` and per-point applicable rules `Q(p)`
/// (the implicit `⊥` choice is always available).
#[derive(Debug, Clone)]
pub struct SpaceInfo {
    pub points: Vec<ControlPointId>,
    pub choices: BTreeMap<ControlPointId, Vec<String>>,
}

impl SpaceInfo {
    /// Number of selections, counting `⊥`.
    pub fn size(&self) -> u64 {
        self.points
            .iter()
            .map(|p| (self.choices[p].len() as u64) + 1)
            .product()
    }

    pub fn describe(&self) -> SpaceDescription {
        SpaceDescription {
            points: self.points.iter().map(|p| p.0).collect(),
            choices: self
                .choices
                .iter()
                .map(|(p, rs)| {
                    let mut rs = rs.clone();
                    rs.push("bot".to_string());
                    (p.0.to_string(), rs)
                })
                .collect(),
            size: self.size(),
        }
    }

    /// The selection rewriting every point with its first applicable rule.
    pub fn full_selection(&self) -> Selection {
        Selection {
            choices: self
                .points
                .iter()
                .map(|p| (*p, Some(self.choices[p][0].clone())))
                .collect(),
        }
    }

    /// The selection leaving every point unchanged.
    pub fn empty_selection(&self) -> Selection {
        Selection {
            choices: self.points.iter().map(|p| (*p, None)).collect(),
        }
    }
}

/// Compute `C` and `Q` for a normalized program.
pub fn instrumentation_space(p: &Program, op: &InstrumentationOperator) -> SpaceInfo {
    let mut points = Vec::new();
    let mut choices = BTreeMap::new();
    p.body.visit(&mut |s| {
        if s.as_assignment().is_none() {
            return;
        }
        let matching: Vec<String> = op
            .rules
            .iter()
            .filter(|r| match_rule(r, s).is_some())
            .map(|r| r.id.clone())
            .collect();
        if !matching.is_empty() {
            points.push(s.id);
            choices.insert(s.id, matching);
        }
    });
    SpaceInfo { points, choices }
}

/// Apply `op` to `p` under `sel`. With `freshen_ghosts`, ghost names that
/// clash with the program vocabulary are renamed; otherwise a clash is an
/// error.
pub fn instrument(
    p: &Program,
    op: &InstrumentationOperator,
    sel: &Selection,
    freshen_ghosts: bool,
) -> Result<InstrumentedProgram, InstrError> {
    let space = instrumentation_space(p, op);
    validate_selection(&space, sel)?;

    let mut namer = FreshNamer::for_program(p);
    // Resolve ghost-name clashes.
    let clashing: BTreeMap<String, String> = op
        .ghosts
        .iter()
        .filter(|g| p.vocab.contains_key(&g.name))
        .map(|g| (g.name.clone(), namer.fresh(&g.name)))
        .collect();
    let op_owned;
    let op = if clashing.is_empty() {
        op
    } else if freshen_ghosts {
        op_owned = op.rename_ghosts(&clashing);
        &op_owned
    } else {
        return Err(InstrError::GhostNameClash(
            clashing.keys().next().unwrap().clone(),
        ));
    };
    for g in &op.ghosts {
        namer.reserve(&g.name);
    }

    let mut b = Builder {
        op,
        sel,
        namer,
        vocab: p.vocab.clone(),
        ghost_vocab: BTreeSet::new(),
        next_id: 0,
        point_map: BTreeMap::new(),
        origin: BTreeMap::new(),
        added_asserts: BTreeSet::new(),
        block_ends: BTreeSet::new(),
    };

    // Outer block: ghost initializations, then the instrumented body.
    let outer_id = b.fresh_id();
    b.point_map.insert(p.body.id, outer_id);
    let mut stmts: Vec<Stmt> = Vec::new();
    for g in &op.ghosts {
        let id = b.fresh_id();
        b.vocab.insert(g.name.clone(), g.ty.clone());
        b.ghost_vocab.insert(g.name.clone());
        stmts.push(Stmt {
            id,
            kind: StmtKind::Decl {
                name: g.name.clone(),
                ty: g.ty.clone(),
                rhs: Some(g.init.clone()),
            },
        });
    }
    match &p.body.kind {
        StmtKind::Block(ss) => {
            for s in ss {
                stmts.extend(b.walk(s));
            }
        }
        _ => stmts.extend(b.walk(&p.body)),
    }
    let body = Stmt {
        id: outer_id,
        kind: StmtKind::Block(stmts),
    };

    let program = Program::new(b.vocab, body);
    Ok(InstrumentedProgram {
        program,
        point_map: b.point_map,
        origin: b.origin,
        added_asserts: b.added_asserts,
        block_ends: b.block_ends,
        selection: sel.clone(),
        operator: op.clone(),
        ghost_vocab: b.ghost_vocab,
    })
}

fn validate_selection(space: &SpaceInfo, sel: &Selection) -> Result<(), InstrError> {
    for p in &space.points {
        match sel.choices.get(p) {
            None => {
                return Err(InstrError::InvalidSelection(format!(
                    "no choice for point {p}"
                )))
            }
            Some(None) => {}
            Some(Some(rule)) => {
                if !space.choices[p].contains(rule) {
                    return Err(InstrError::InvalidSelection(format!(
                        "rule `{rule}` not applicable at point {p}"
                    )));
                }
            }
        }
    }
    for p in sel.choices.keys() {
        if !space.choices.contains_key(p) {
            return Err(InstrError::InvalidSelection(format!(
                "point {p} is not a matchable control point"
            )));
        }
    }
    Ok(())
}

struct Builder<'a> {
    op: &'a InstrumentationOperator,
    sel: &'a Selection,
    namer: FreshNamer,
    vocab: BTreeMap<String, TypeExpr>,
    ghost_vocab: BTreeSet<String>,
    next_id: u32,
    point_map: BTreeMap<ControlPointId, ControlPointId>,
    origin: BTreeMap<ControlPointId, ControlPointId>,
    added_asserts: BTreeSet<ControlPointId>,
    block_ends: BTreeSet<ControlPointId>,
}

impl<'a> Builder<'a> {
    fn fresh_id(&mut self) -> ControlPointId {
        let id = ControlPointId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Rebuild one original statement; rewritten assignments expand to a
    /// statement list that is spliced into the surrounding block.
    fn walk(&mut self, s: &Stmt) -> Vec<Stmt> {
        if let Some(Some(rule_id)) = self.sel.get(s.id) {
            let rule = self
                .op
                .rule(rule_id)
                .expect("selection validated against the space");
            return self.rewrite(s, rule);
        }
        let id = self.fresh_id();
        self.point_map.insert(s.id, id);
        let kind = match &s.kind {
            StmtKind::Skip => StmtKind::Skip,
            StmtKind::Decl { name, ty, rhs } => StmtKind::Decl {
                name: name.clone(),
                ty: ty.clone(),
                rhs: rhs.clone(),
            },
            StmtKind::Assign { lhs, rhs } => StmtKind::Assign {
                lhs: lhs.clone(),
                rhs: rhs.clone(),
            },
            StmtKind::Assert(e) => StmtKind::Assert(e.clone()),
            StmtKind::Assume(e) => StmtKind::Assume(e.clone()),
            StmtKind::Block(ss) => {
                let mut out = Vec::new();
                for inner in ss {
                    out.extend(self.walk(inner));
                }
                StmtKind::Block(out)
            }
            StmtKind::While { cond, body } => {
                let body = self.walk_branch(body);
                StmtKind::While {
                    cond: cond.clone(),
                    body: Box::new(body),
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let t = self.walk_branch(then_branch);
                let e = self.walk_branch(else_branch);
                StmtKind::If {
                    cond: cond.clone(),
                    then_branch: Box::new(t),
                    else_branch: Box::new(e),
                }
            }
        };
        vec![Stmt { id, kind }]
    }

    /// A branch stays a single statement: blocks splice internally,
    /// non-block statements get wrapped if rewriting expanded them.
    fn walk_branch(&mut self, s: &Stmt) -> Stmt {
        let mut out = self.walk(s);
        if out.len() == 1 {
            out.remove(0)
        } else {
            Stmt {
                id: self.fresh_id(),
                kind: StmtKind::Block(out),
            }
        }
    }

    fn rewrite(&mut self, s: &Stmt, rule: &RewriteRule) -> Vec<Stmt> {
        let m = match_rule(rule, s).expect("selection validated");
        let orig_lhs = m.lhs.clone();
        let decl_ty = match &s.kind {
            StmtKind::Decl { ty, .. } => Some(ty.clone()),
            _ => None,
        };

        // A left-hand side occurring in the right-hand side gets a fresh
        // stand-in so the rewritten right-hand side stays stable.
        let split_ty = if m.lhs_in_rhs {
            debug_assert!(decl_ty.is_none(), "a declaration cannot reference itself");
            Some(
                self.vocab
                    .get(&orig_lhs)
                    .cloned()
                    .expect("instrument precondition: program type-checks"),
            )
        } else {
            None
        };
        let target = match &split_ty {
            Some(ty) => {
                let fresh = self.namer.fresh(&orig_lhs);
                self.vocab.insert(fresh.clone(), ty.clone());
                self.ghost_vocab.insert(fresh.clone());
                fresh
            }
            None => orig_lhs.clone(),
        };

        let mut subst = m.subst.clone();
        subst.insert(rule.lhs_meta.clone(), Expr::var(target.clone()));
        let mut body: Vec<Stmt> = rule
            .template
            .iter()
            .map(|t| subst_template_stmt(t, &subst, &rule.lhs_meta, &target))
            .collect();

        // Declaration handling: when the original statement declared its
        // target (or a fresh stand-in was introduced), the single assignment
        // to it inside the template is fused into a declaration; templates
        // assigning on several paths get a plain declaration hoisted in
        // front (cf. the `Bool b;` shape of rewritten quantifier reads).
        let need_decl = match (&split_ty, &decl_ty) {
            (Some(ty), _) => Some((target.clone(), ty.clone())),
            (None, Some(ty)) => Some((orig_lhs.clone(), ty.clone())),
            (None, None) => None,
        };
        if let Some((name, ty)) = need_decl {
            let top_level_assigns: Vec<usize> = body
                .iter()
                .enumerate()
                .filter(|(_, st)| {
                    matches!(&st.kind, StmtKind::Assign { lhs, .. } if lhs == &name)
                })
                .map(|(i, _)| i)
                .collect();
            let nested_count = {
                let mut n = 0;
                for st in &body {
                    st.visit(&mut |x| {
                        if matches!(&x.kind, StmtKind::Assign { lhs, .. } if lhs == &name) {
                            n += 1;
                        }
                    });
                }
                n
            };
            if nested_count == 1 && top_level_assigns.len() == 1 {
                let idx = top_level_assigns[0];
                let StmtKind::Assign { rhs, .. } = body[idx].kind.clone() else {
                    unreachable!()
                };
                body[idx] = Stmt::decl(name, ty, Some(rhs));
            } else {
                body.insert(0, Stmt::decl(name, ty, None));
            }
        }

        if split_ty.is_some() {
            body.push(Stmt::assign(orig_lhs.clone(), Expr::var(target.clone())));
        }

        // Number the generated statements and record bookkeeping.
        let mut numbered = Vec::with_capacity(body.len());
        for st in body {
            numbered.push(self.number_new(st, s.id));
        }

        // The aligned point: where the original assignment's effect is
        // complete. For a split that is the trailing copy-back; otherwise the
        // unique statement assigning the target, or the last top-level
        // statement touching it (branchy templates).
        let align = if split_ty.is_some() {
            numbered.last().map(|st| st.id)
        } else {
            let mut candidate = None;
            for st in &numbered {
                let mut touches = false;
                st.visit(&mut |x| match &x.kind {
                    StmtKind::Assign { lhs, .. } if lhs == &target => touches = true,
                    StmtKind::Decl { name, .. } if name == &target => touches = true,
                    _ => {}
                });
                if touches {
                    candidate = Some(st.id);
                }
            }
            candidate
        };
        if let Some(a) = align {
            self.point_map.insert(s.id, a);
        }
        if let Some(last) = numbered.last() {
            self.block_ends.insert(last.id);
        }
        numbered
    }

    /// Assign fresh pre-order ids to a generated statement; every statement
    /// is recorded as originating from `orig`, and generated assertions are
    /// marked as added.
    fn number_new(&mut self, mut s: Stmt, orig: ControlPointId) -> Stmt {
        s.id = self.fresh_id();
        self.origin.insert(s.id, orig);
        match &mut s.kind {
            StmtKind::Assert(_) => {
                self.added_asserts.insert(s.id);
            }
            StmtKind::Block(ss) => {
                let items = std::mem::take(ss);
                *ss = items
                    .into_iter()
                    .map(|inner| self.number_new(inner, orig))
                    .collect();
            }
            StmtKind::While { body, .. } => {
                let b = std::mem::replace(body.as_mut(), Stmt::skip());
                **body = self.number_new(b, orig);
            }
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                let t = std::mem::replace(then_branch.as_mut(), Stmt::skip());
                **then_branch = self.number_new(t, orig);
                let e = std::mem::replace(else_branch.as_mut(), Stmt::skip());
                **else_branch = self.number_new(e, orig);
            }
            _ => {}
        }
        s
    }
}
