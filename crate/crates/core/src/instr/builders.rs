//! The shipped instrumentation operators: the specialized quantifier
//! operators, the square-tracking operator, and the generic interval-tracking
//! builder for aggregations over cancellative and non-cancellative monoids.

use crate::ast::*;
use crate::error::InstrError;
use crate::instr::{GhostDecl, InstrumentationOperator, RewriteRule, StateGen};
use crate::monoid::{registry_lookup, AggregatorSpec, Finalizer, MonoidOp, SingletonMap};

fn meta(name: &str) -> Expr {
    Expr::meta(name)
}

fn var(name: &str) -> Expr {
    Expr::var(name)
}

/// `$r = t` assignment template statement.
fn assign_lhs_meta(lhs_meta: &str, rhs: Expr) -> Stmt {
    Stmt::assign(format!("${lhs_meta}"), rhs)
}

/// Names of the ghost variables of an interval-tracking operator.
struct IntervalGhosts {
    lo: &'static str,
    hi: &'static str,
    ar: &'static str,
}

const AG: IntervalGhosts = IntervalGhosts {
    lo: "ag_lo",
    hi: "ag_hi",
    ar: "ag_ar",
};

const QU: IntervalGhosts = IntervalGhosts {
    lo: "qu_lo",
    hi: "qu_hi",
    ar: "qu_ar",
};

impl IntervalGhosts {
    /// `lo == hi || i < lo - 1 || i > hi`
    fn far_or_empty(&self, i: &Expr) -> Expr {
        Expr::or(
            Expr::or(
                Expr::eq(var(self.lo), var(self.hi)),
                Expr::lt(i.clone(), Expr::sub(var(self.lo), Expr::int(1))),
            ),
            Expr::gt(i.clone(), var(self.hi)),
        )
    }

    /// `lo <= i && i < hi`
    fn inside(&self, i: &Expr) -> Expr {
        Expr::and(
            Expr::leq(var(self.lo), i.clone()),
            Expr::lt(i.clone(), var(self.hi)),
        )
    }

    /// `lo = i; hi = i + 1;`
    fn reset_bounds(&self, i: &Expr) -> Vec<Stmt> {
        vec![
            Stmt::assign(self.lo, i.clone()),
            Stmt::assign(self.hi, Expr::add(i.clone(), Expr::int(1))),
        ]
    }

    /// `if (lo - 1 == i) { lo = i; <extra> } else if (hi == i) { hi = i + 1; <extra> }`
    fn bound_update_chain(&self, i: &Expr, left_extra: Vec<Stmt>, right_extra: Vec<Stmt>) -> Stmt {
        let mut left = vec![Stmt::assign(self.lo, i.clone())];
        left.splice(0..0, left_extra);
        let mut right = vec![Stmt::assign(self.hi, Expr::add(i.clone(), Expr::int(1)))];
        right.splice(0..0, right_extra);
        Stmt::if_else(
            Expr::eq(Expr::sub(var(self.lo), Expr::int(1)), i.clone()),
            Stmt::block(left),
            Stmt::block(vec![Stmt::if_else(
                Expr::eq(var(self.hi), i.clone()),
                Stmt::block(right),
                Stmt::skip(),
            )]),
        )
    }
}

/// The universal/existential quantifier operators, specialized from the
/// generic recipe: the tracked flag is reset only when a store may
/// invalidate it, and the quantified interval may be a sub-interval (for a
/// true flag) or super-interval (false flag) of the tracked one.
pub fn quantifier_operator(kind: QuantKind, pred: &LambdaPred) -> InstrumentationOperator {
    let g = QU;
    let p_flag = "qu_P";
    let forall = matches!(kind, QuantKind::Forall);
    let i = meta("i");
    let x = meta("x");
    let a = meta("a");
    let p_of_store = pred.apply(&x, &i);

    // Store: reset when far/empty, or when overwriting inside could
    // invalidate the flag (P holds and flag is false, for ∀; dually for ∃).
    let invalidating = if forall {
        Expr::and_all(vec![
            p_of_store.clone(),
            Expr::not(var(p_flag)),
            Expr::leq(var(g.lo), i.clone()),
            Expr::lt(i.clone(), var(g.hi)),
        ])
    } else {
        Expr::and_all(vec![
            Expr::not(p_of_store.clone()),
            var(p_flag),
            Expr::leq(var(g.lo), i.clone()),
            Expr::lt(i.clone(), var(g.hi)),
        ])
    };
    let reset_cond = Expr::or(g.far_or_empty(&i), invalidating);
    let mut reset = g.reset_bounds(&i);
    reset.push(Stmt::assign(p_flag, p_of_store.clone()));
    let merge = |old: Expr, new: Expr| {
        if forall {
            Expr::and(old, new)
        } else {
            Expr::or(old, new)
        }
    };
    let else_branch = Stmt::block(vec![
        Stmt::assert(Expr::eq(var(g.ar), a.clone())),
        Stmt::assign(p_flag, merge(var(p_flag), p_of_store.clone())),
        g.bound_update_chain(&i, vec![], vec![]),
    ]);
    let store_template = vec![
        Stmt::if_else(reset_cond, Stmt::block(reset), else_branch),
        assign_lhs_meta("a2", Expr::store(a.clone(), i.clone(), x.clone())),
        Stmt::assign(g.ar, meta_lhs_var("a2")),
    ];
    let store_rule = RewriteRule {
        id: "store".into(),
        lhs_meta: "a2".into(),
        pattern: Expr::store(meta("a"), meta("i"), meta("x")),
        template: store_template,
    };

    // Select: the read value is the assigned variable, so the original read
    // executes first; reading inside the tracked interval cannot invalidate.
    let read = meta_lhs_var("x2");
    let p_of_read = pred.apply(&read, &i);
    let mut sel_reset = g.reset_bounds(&i);
    sel_reset.push(Stmt::assign(p_flag, p_of_read.clone()));
    let sel_else = Stmt::block(vec![
        Stmt::assert(Expr::eq(var(g.ar), a.clone())),
        Stmt::assign(p_flag, merge(var(p_flag), p_of_read.clone())),
        g.bound_update_chain(&i, vec![], vec![]),
    ]);
    let select_template = vec![
        assign_lhs_meta("x2", Expr::select(a.clone(), i.clone())),
        Stmt::if_else(g.far_or_empty(&i), Stmt::block(sel_reset), sel_else),
        Stmt::assign(g.ar, a.clone()),
    ];
    let select_rule = RewriteRule {
        id: "select".into(),
        lhs_meta: "x2".into(),
        pattern: Expr::select(meta("a"), meta("i")),
        template: select_template,
    };

    // Quantified expression: empty interval short-circuits; otherwise the
    // quantified interval must be a sub-interval of the tracked one when the
    // flag is true, and a super-interval when it is false (dually for ∃).
    let l = meta("l");
    let u = meta("u");
    let sub_interval = Expr::and(
        Expr::and(Expr::eq(var(g.ar), a.clone()), Expr::geq(l.clone(), var(g.lo))),
        Expr::leq(u.clone(), var(g.hi)),
    );
    let super_interval = Expr::and(
        Expr::and(Expr::eq(var(g.ar), a.clone()), Expr::leq(l.clone(), var(g.lo))),
        Expr::geq(u.clone(), var(g.hi)),
    );
    let (true_guard, false_guard) = if forall {
        (sub_interval, super_interval)
    } else {
        (super_interval, sub_interval)
    };
    let agg_template = vec![Stmt::if_else(
        Expr::leq(u.clone(), l.clone()),
        Stmt::block(vec![assign_lhs_meta("b", Expr::BoolLit(forall))]),
        Stmt::block(vec![
            Stmt::if_else(
                var(p_flag),
                Stmt::block(vec![Stmt::assert(true_guard)]),
                Stmt::block(vec![Stmt::assert(false_guard)]),
            ),
            assign_lhs_meta("b", var(p_flag)),
        ]),
    )];
    let agg_rule = RewriteRule {
        id: "aggregate".into(),
        lhs_meta: "b".into(),
        pattern: Expr::Quant {
            kind,
            array: Box::new(meta("a")),
            lo: Box::new(meta("l")),
            hi: Box::new(meta("u")),
            pred: pred.clone(),
        },
        template: agg_template,
    };

    let quant_over_shadow = Expr::Quant {
        kind,
        array: Box::new(var(g.ar)),
        lo: Box::new(var(g.lo)),
        hi: Box::new(var(g.hi)),
        pred: pred.clone(),
    };
    let invariant = Expr::or(
        Expr::eq(var(g.lo), var(g.hi)),
        Expr::and(
            Expr::lt(var(g.lo), var(g.hi)),
            Expr::eq(var(p_flag), quant_over_shadow),
        ),
    );

    let agg_name = if forall { "forall" } else { "exists" };
    let agg = registry_lookup(agg_name, Some(pred)).expect("registered");
    InstrumentationOperator {
        name: agg_name.to_string(),
        ghosts: vec![
            GhostDecl::new(g.lo, TypeExpr::Int, Expr::int(0)),
            GhostDecl::new(g.hi, TypeExpr::Int, Expr::int(0)),
            GhostDecl::new(
                g.ar,
                TypeExpr::array(TypeExpr::Int),
                Expr::const_array(Expr::int(0)),
            ),
            GhostDecl::new(p_flag, TypeExpr::Bool, Expr::BoolLit(forall)),
        ],
        rules: vec![store_rule, select_rule, agg_rule],
        invariant,
        aggregator: Some(agg.clone()),
        state_gen: StateGen::Aggregation {
            lo: g.lo.into(),
            hi: g.hi.into(),
            array: g.ar.into(),
            nz_array: None,
            value_vars: vec![p_flag.into()],
            agg,
        },
    }
}

/// `$name` as a variable reference to the rule's left-hand-side meta, usable
/// inside template expressions (substituted like any other meta).
fn meta_lhs_var(name: &str) -> Expr {
    Expr::meta(name)
}

/// The square-tracking operator: maintains `x_sq == x_shad²` across the four
/// assignment shapes `y = α`, `y = x + α`, `y = α * x`, `y = x * x`.
pub fn square_operator() -> InstrumentationOperator {
    let alpha = Expr::MetaVar {
        name: "alpha".into(),
        kind: MetaKind::Lit,
    };
    let x = meta("x");
    let y_rhs = |e: Expr| assign_lhs_meta("y", e);
    let guard = Stmt::assert(Expr::eq(x.clone(), var("x_shad")));
    let shad_tracks = Stmt::assign("x_shad", meta("y"));

    let r1 = RewriteRule {
        id: "R1".into(),
        lhs_meta: "y".into(),
        pattern: alpha.clone(),
        template: vec![
            y_rhs(alpha.clone()),
            Stmt::assign("x_sq", Expr::mul(alpha.clone(), alpha.clone())),
            shad_tracks.clone(),
        ],
    };
    let r2 = RewriteRule {
        id: "R2".into(),
        lhs_meta: "y".into(),
        pattern: Expr::add(x.clone(), alpha.clone()),
        template: vec![
            guard.clone(),
            Stmt::assign(
                "x_sq",
                Expr::add(
                    Expr::add(
                        var("x_sq"),
                        Expr::mul(Expr::mul(Expr::int(2), alpha.clone()), x.clone()),
                    ),
                    Expr::mul(alpha.clone(), alpha.clone()),
                ),
            ),
            y_rhs(Expr::add(x.clone(), alpha.clone())),
            shad_tracks.clone(),
        ],
    };
    let r3 = RewriteRule {
        id: "R3".into(),
        lhs_meta: "y".into(),
        pattern: Expr::mul(alpha.clone(), x.clone()),
        template: vec![
            guard.clone(),
            Stmt::assign(
                "x_sq",
                Expr::mul(Expr::mul(alpha.clone(), alpha.clone()), var("x_sq")),
            ),
            y_rhs(Expr::mul(alpha.clone(), x.clone())),
            shad_tracks.clone(),
        ],
    };
    let r4 = RewriteRule {
        id: "R4".into(),
        lhs_meta: "y".into(),
        pattern: Expr::mul(x.clone(), x.clone()),
        template: vec![guard, y_rhs(var("x_sq"))],
    };

    InstrumentationOperator {
        name: "square".into(),
        ghosts: vec![
            GhostDecl::new("x_sq", TypeExpr::Int, Expr::int(0)),
            GhostDecl::new("x_shad", TypeExpr::Int, Expr::int(0)),
        ],
        rules: vec![r1, r2, r3, r4],
        invariant: Expr::eq(var("x_sq"), Expr::mul(var("x_shad"), var("x_shad"))),
        aggregator: None,
        state_gen: StateGen::SquarePair {
            sq: "x_sq".into(),
            shad: "x_shad".into(),
        },
    }
}

/// How the carrier of an aggregation is realized as ghost code.
struct CarrierCode {
    /// Value ghosts `(name, type, init)`.
    ghosts: Vec<(&'static str, TypeExpr, Expr)>,
    agg: AggregatorSpec,
}

impl CarrierCode {
    fn for_agg(agg: &AggregatorSpec) -> Result<CarrierCode, InstrError> {
        let ghosts: Vec<(&'static str, TypeExpr, Expr)> = match (&agg.monoid.op, &agg.singleton) {
            (MonoidOp::PairProd, _) => vec![
                ("ag_val_p", TypeExpr::Int, Expr::int(1)),
                ("ag_val_c", TypeExpr::Int, Expr::int(0)),
            ],
            (MonoidOp::Add, _) => vec![("ag_val", TypeExpr::Int, Expr::int(0))],
            (MonoidOp::Mul, _) => vec![("ag_val", TypeExpr::Int, Expr::int(1))],
            (MonoidOp::Max, _) => vec![("ag_val", TypeExpr::Int, Expr::InfLit(false))],
            (MonoidOp::Min, _) => vec![("ag_val", TypeExpr::Int, Expr::InfLit(true))],
            (MonoidOp::And, _) => vec![("ag_val", TypeExpr::Bool, Expr::BoolLit(true))],
            (MonoidOp::Or, _) => vec![("ag_val", TypeExpr::Bool, Expr::BoolLit(false))],
        };
        Ok(CarrierCode {
            ghosts,
            agg: agg.clone(),
        })
    }

    fn uses_nz_shadow(&self) -> bool {
        matches!(self.agg.monoid.op, MonoidOp::PairProd)
    }

    /// `h(x)` at value `x` and index `i`, as a core expression (only for
    /// single-variable carriers).
    fn lift_expr(&self, x: &Expr, i: &Expr) -> Expr {
        match &self.agg.singleton {
            SingletonMap::Identity => x.clone(),
            SingletonMap::PredBool(p) => p.apply(x, i),
            SingletonMap::PredCount(p) => Expr::ite(p.apply(x, i), Expr::int(1), Expr::int(0)),
            SingletonMap::ProdPair => unreachable!("pair carriers use two ghosts"),
        }
    }

    /// `ag_val := h(x)` (reset to a singleton interval).
    fn set_to_lift(&self, x: &Expr, i: &Expr) -> Vec<Stmt> {
        match self.agg.monoid.op {
            MonoidOp::PairProd => vec![
                Stmt::assign("ag_val_p", prod_lift_p(x)),
                Stmt::assign("ag_val_c", prod_lift_c(x)),
            ],
            _ => vec![Stmt::assign("ag_val", self.lift_expr(x, i))],
        }
    }

    /// `ag_val := h(x) ∘ ag_val` (left) or `ag_val := ag_val ∘ h(x)` (right).
    fn combine(&self, x: &Expr, i: &Expr, lift_on_left: bool) -> Vec<Stmt> {
        let op = self.agg.monoid.op;
        if matches!(op, MonoidOp::PairProd) {
            return vec![
                Stmt::assign("ag_val_p", Expr::mul(var("ag_val_p"), prod_lift_p(x))),
                Stmt::assign("ag_val_c", Expr::add(var("ag_val_c"), prod_lift_c(x))),
            ];
        }
        let lifted = self.lift_expr(x, i);
        let v = var("ag_val");
        let (a, b) = if lift_on_left {
            (lifted, v)
        } else {
            (v, lifted)
        };
        let combined = match op {
            MonoidOp::Add => Expr::add(a, b),
            MonoidOp::Mul => Expr::mul(a, b),
            MonoidOp::And => Expr::and(a, b),
            MonoidOp::Or => Expr::or(a, b),
            // max/min via a total-order ite; sound for the sentinel values.
            MonoidOp::Max => Expr::ite(Expr::leq(a.clone(), b.clone()), b, a),
            MonoidOp::Min => Expr::ite(Expr::leq(a.clone(), b.clone()), a, b),
            MonoidOp::PairProd => unreachable!(),
        };
        vec![Stmt::assign("ag_val", combined)]
    }

    /// In-interval update `ag_val := (ag_val ∘⁻¹ h(old)) ∘ h(x)` where `old`
    /// is the shadow array's value at the written index. Cancellative only.
    fn inside_update(&self, x: &Expr, i: &Expr, shadow: &str) -> Option<Vec<Stmt>> {
        if !self.agg.monoid.has_inverse {
            return None;
        }
        let old = Expr::select(var(shadow), i.clone());
        match self.agg.monoid.op {
            MonoidOp::Add => {
                let removed = match &self.agg.singleton {
                    SingletonMap::Identity => old,
                    SingletonMap::PredCount(p) => {
                        Expr::ite(p.apply(&old, i), Expr::int(1), Expr::int(0))
                    }
                    _ => unreachable!("additive carriers"),
                };
                let added = self.lift_expr(x, i);
                Some(vec![Stmt::assign(
                    "ag_val",
                    Expr::add(Expr::sub(var("ag_val"), removed), added),
                )])
            }
            MonoidOp::PairProd => {
                // The nonzero-shadow array holds h(old)'s product component.
                let old_p = Expr::select(var("ag_nz"), i.clone());
                let old_c = Expr::ite(Expr::eq(old, Expr::int(0)), Expr::int(1), Expr::int(0));
                Some(vec![
                    Stmt::assign(
                        "ag_val_p",
                        Expr::mul(Expr::div(var("ag_val_p"), old_p), prod_lift_p(x)),
                    ),
                    Stmt::assign(
                        "ag_val_c",
                        Expr::add(Expr::sub(var("ag_val_c"), old_c), prod_lift_c(x)),
                    ),
                ])
            }
            _ => None,
        }
    }

    /// `r := g(ag_val)`.
    fn finalize_current(&self) -> Expr {
        match self.agg.finalize {
            Finalizer::Identity => var("ag_val"),
            Finalizer::ExistsPositive => Expr::gt(var("ag_val"), Expr::int(0)),
            Finalizer::ProdPair => Expr::ite(
                Expr::eq(var("ag_val_c"), Expr::int(0)),
                var("ag_val_p"),
                Expr::int(0),
            ),
        }
    }

    /// `g(e)` for the empty interval, as a literal.
    fn finalize_identity(&self) -> Expr {
        match (&self.agg.finalize, &self.agg.monoid.op) {
            (Finalizer::ExistsPositive, _) => Expr::BoolLit(false),
            (Finalizer::ProdPair, _) => Expr::int(1),
            (Finalizer::Identity, MonoidOp::Add) => Expr::int(0),
            (Finalizer::Identity, MonoidOp::Mul) => Expr::int(1),
            (Finalizer::Identity, MonoidOp::Max) => Expr::InfLit(false),
            (Finalizer::Identity, MonoidOp::Min) => Expr::InfLit(true),
            (Finalizer::Identity, MonoidOp::And) => Expr::BoolLit(true),
            (Finalizer::Identity, MonoidOp::Or) => Expr::BoolLit(false),
            (Finalizer::Identity, MonoidOp::PairProd) => unreachable!(),
        }
    }

    /// Maintain the nonzero-shadow array after a write of `x` at `i`.
    fn nz_store(&self, x: &Expr, i: &Expr) -> Option<Stmt> {
        self.uses_nz_shadow().then(|| {
            Stmt::assign(
                "ag_nz",
                Expr::store(var("ag_nz"), i.clone(), prod_lift_p(x)),
            )
        })
    }

    /// The invariant conjuncts tying the value ghosts to the shadow array.
    fn value_invariant(&self) -> Expr {
        let interval = |array: &str| {
            (
                Box::new(var(array)),
                Box::new(var(AG.lo)),
                Box::new(var(AG.hi)),
            )
        };
        match self.agg.monoid.op {
            MonoidOp::PairProd => {
                let zero_pred = LambdaPred::new(
                    "x",
                    "i",
                    Expr::eq(var("x"), Expr::int(0)),
                );
                let (array, lo, hi) = interval(AG.ar);
                let count_zeros = Expr::Aggregate {
                    agg: AggName::Numof,
                    array,
                    lo,
                    hi,
                    pred: Some(zero_pred),
                };
                let (array, lo, hi) = interval("ag_nz");
                let prod_nz = Expr::Aggregate {
                    agg: AggName::Product,
                    array,
                    lo,
                    hi,
                    pred: None,
                };
                let nz_consistent = {
                    let body = Expr::eq(
                        var("z"),
                        Expr::ite(
                            Expr::eq(Expr::select(var(AG.ar), var("k")), Expr::int(0)),
                            Expr::int(1),
                            Expr::select(var(AG.ar), var("k")),
                        ),
                    );
                    let (array, lo, hi) = interval("ag_nz");
                    Expr::Quant {
                        kind: QuantKind::Forall,
                        array,
                        lo,
                        hi,
                        pred: LambdaPred::new("z", "k", body),
                    }
                };
                Expr::and(
                    Expr::and(
                        Expr::eq(var("ag_val_c"), count_zeros),
                        Expr::eq(var("ag_val_p"), prod_nz),
                    ),
                    nz_consistent,
                )
            }
            _ => {
                let (array, lo, hi) = interval(AG.ar);
                let agg_expr = match &self.agg.singleton {
                    SingletonMap::Identity => {
                        let name = match self.agg.monoid.op {
                            MonoidOp::Add => AggName::Sum,
                            MonoidOp::Mul => AggName::Product,
                            MonoidOp::Max => AggName::Max,
                            MonoidOp::Min => AggName::Min,
                            _ => unreachable!(),
                        };
                        Expr::Aggregate {
                            agg: name,
                            array,
                            lo,
                            hi,
                            pred: None,
                        }
                    }
                    SingletonMap::PredCount(p) => Expr::Aggregate {
                        agg: AggName::Numof,
                        array,
                        lo,
                        hi,
                        pred: Some(p.clone()),
                    },
                    SingletonMap::PredBool(p) => Expr::Quant {
                        kind: if matches!(self.agg.monoid.op, MonoidOp::And) {
                            QuantKind::Forall
                        } else {
                            QuantKind::Exists
                        },
                        array,
                        lo,
                        hi,
                        pred: p.clone(),
                    },
                    SingletonMap::ProdPair => unreachable!(),
                };
                Expr::eq(var("ag_val"), agg_expr)
            }
        }
    }
}

fn prod_lift_p(x: &Expr) -> Expr {
    Expr::ite(Expr::eq(x.clone(), Expr::int(0)), Expr::int(1), x.clone())
}

fn prod_lift_c(x: &Expr) -> Expr {
    Expr::ite(Expr::eq(x.clone(), Expr::int(0)), Expr::int(1), Expr::int(0))
}

/// Build the interval-tracking operator for an aggregation. With
/// `cancellative` the store rule updates the tracked value in place for
/// writes inside the interval; otherwise such writes reset the tracking to a
/// singleton.
pub fn build_aggregation_operator(
    agg: &AggregatorSpec,
    cancellative: bool,
) -> Result<InstrumentationOperator, InstrError> {
    if cancellative && !(agg.monoid.has_inverse && agg.monoid.commutative) {
        return Err(InstrError::NotCancellative(agg.name.clone()));
    }
    let code = CarrierCode::for_agg(agg)?;
    let g = AG;
    let i = meta("i");
    let x = meta("x");
    let a = meta("a");

    // Store rule.
    let mut reset = g.reset_bounds(&i);
    reset.extend(code.set_to_lift(&x, &i));
    let reset_cond = if cancellative {
        g.far_or_empty(&i)
    } else {
        Expr::or(g.far_or_empty(&i), g.inside(&i))
    };
    let extend_chain = g.bound_update_chain(&i, code.combine(&x, &i, true), code.combine(&x, &i, false));
    let guarded = if cancellative {
        let inside_update = code
            .inside_update(&x, &i, g.ar)
            .expect("cancellative carrier has an inverse");
        Stmt::block(vec![
            Stmt::assert(Expr::eq(var(g.ar), a.clone())),
            Stmt::if_else(
                g.inside(&i),
                Stmt::block(inside_update),
                Stmt::block(vec![extend_chain]),
            ),
        ])
    } else {
        Stmt::block(vec![
            Stmt::assert(Expr::eq(var(g.ar), a.clone())),
            extend_chain,
        ])
    };
    let mut store_template = vec![
        Stmt::if_else(reset_cond, Stmt::block(reset), guarded),
        assign_lhs_meta("a2", Expr::store(a.clone(), i.clone(), x.clone())),
    ];
    if let Some(nz) = code.nz_store(&x, &i) {
        store_template.push(nz);
    }
    store_template.push(Stmt::assign(g.ar, meta_lhs_var("a2")));
    let store_rule = RewriteRule {
        id: "store".into(),
        lhs_meta: "a2".into(),
        pattern: Expr::store(meta("a"), meta("i"), meta("x")),
        template: store_template,
    };

    // Select rule: the read executes first; in-interval reads only need the
    // shadow-equality guard.
    let read = meta_lhs_var("x2");
    let mut sel_reset = g.reset_bounds(&i);
    sel_reset.extend(code.set_to_lift(&read, &i));
    let sel_else = Stmt::block(vec![
        Stmt::assert(Expr::eq(var(g.ar), a.clone())),
        g.bound_update_chain(&i, code.combine(&read, &i, true), code.combine(&read, &i, false)),
    ]);
    let mut select_template = vec![
        assign_lhs_meta("x2", Expr::select(a.clone(), i.clone())),
        Stmt::if_else(g.far_or_empty(&i), Stmt::block(sel_reset), sel_else),
    ];
    if let Some(nz) = code.nz_store(&read, &i) {
        select_template.push(nz);
    }
    select_template.push(Stmt::assign(g.ar, a.clone()));
    let select_rule = RewriteRule {
        id: "select".into(),
        lhs_meta: "x2".into(),
        pattern: Expr::select(meta("a"), meta("i")),
        template: select_template,
    };

    // Aggregate rule.
    let l = meta("l");
    let u = meta("u");
    let agg_pattern = aggregate_pattern(agg, &a, &l, &u);
    let agg_template = vec![Stmt::if_else(
        Expr::leq(u.clone(), l.clone()),
        Stmt::block(vec![assign_lhs_meta("r", code.finalize_identity())]),
        Stmt::block(vec![
            Stmt::assert(Expr::and(
                Expr::and(Expr::eq(var(g.ar), a.clone()), Expr::eq(l.clone(), var(g.lo))),
                Expr::eq(u.clone(), var(g.hi)),
            )),
            assign_lhs_meta("r", code.finalize_current()),
        ]),
    )];
    let agg_rule = RewriteRule {
        id: "aggregate".into(),
        lhs_meta: "r".into(),
        pattern: agg_pattern,
        template: agg_template,
    };

    let mut ghosts = vec![
        GhostDecl::new(g.lo, TypeExpr::Int, Expr::int(0)),
        GhostDecl::new(g.hi, TypeExpr::Int, Expr::int(0)),
    ];
    for (name, ty, init) in &code.ghosts {
        ghosts.push(GhostDecl::new(*name, ty.clone(), init.clone()));
    }
    ghosts.push(GhostDecl::new(
        g.ar,
        TypeExpr::array(TypeExpr::Int),
        Expr::const_array(Expr::int(0)),
    ));
    if code.uses_nz_shadow() {
        ghosts.push(GhostDecl::new(
            "ag_nz",
            TypeExpr::array(TypeExpr::Int),
            Expr::const_array(Expr::int(1)),
        ));
    }

    let invariant = Expr::and(
        Expr::leq(var(g.lo), var(g.hi)),
        code.value_invariant(),
    );

    let value_vars = code.ghosts.iter().map(|(n, _, _)| n.to_string()).collect();
    Ok(InstrumentationOperator {
        name: agg.name.clone(),
        ghosts,
        rules: vec![store_rule, select_rule, agg_rule],
        invariant,
        aggregator: Some(agg.clone()),
        state_gen: StateGen::Aggregation {
            lo: g.lo.into(),
            hi: g.hi.into(),
            array: g.ar.into(),
            nz_array: code.uses_nz_shadow().then(|| "ag_nz".to_string()),
            value_vars,
            agg: agg.clone(),
        },
    })
}

/// The surface expression matched by an aggregation operator's rewrite rule.
fn aggregate_pattern(agg: &AggregatorSpec, a: &Expr, l: &Expr, u: &Expr) -> Expr {
    let boxed = (Box::new(a.clone()), Box::new(l.clone()), Box::new(u.clone()));
    match agg.name.as_str() {
        "sum" => surface_agg(AggName::Sum, boxed, None),
        "min" => surface_agg(AggName::Min, boxed, None),
        "max" => surface_agg(AggName::Max, boxed, None),
        "product" | "product-cancellative" => surface_agg(AggName::Product, boxed, None),
        "numof" => surface_agg(AggName::Numof, boxed, agg.pred().cloned()),
        "forall" | "exists" => Expr::Quant {
            kind: if agg.name == "forall" {
                QuantKind::Forall
            } else {
                QuantKind::Exists
            },
            array: boxed.0,
            lo: boxed.1,
            hi: boxed.2,
            pred: agg.pred().cloned().expect("quantifier aggregator has a predicate"),
        },
        "exists-cancellative" => Expr::Quant {
            kind: QuantKind::Exists,
            array: boxed.0,
            lo: boxed.1,
            hi: boxed.2,
            pred: agg.pred().cloned().expect("predicate"),
        },
        other => panic!("no surface form for aggregator {other}"),
    }
}

fn surface_agg(
    name: AggName,
    (array, lo, hi): (Box<Expr>, Box<Expr>, Box<Expr>),
    pred: Option<LambdaPred>,
) -> Expr {
    Expr::Aggregate {
        agg: name,
        array,
        lo,
        hi,
        pred,
    }
}

/// Look up a shipped operator by name. `forall`, `exists`, `numof`, and
/// `exists-cancellative` require a predicate.
pub fn builtin_operator(
    name: &str,
    pred: Option<&LambdaPred>,
) -> Result<InstrumentationOperator, InstrError> {
    match name {
        "square" => Ok(square_operator()),
        "forall" => {
            let p = pred.ok_or_else(|| InstrError::UnknownOperator("forall needs a predicate".into()))?;
            Ok(quantifier_operator(QuantKind::Forall, p))
        }
        "exists" => {
            let p = pred.ok_or_else(|| InstrError::UnknownOperator("exists needs a predicate".into()))?;
            Ok(quantifier_operator(QuantKind::Exists, p))
        }
        "sum" | "numof" | "exists-cancellative" | "product-cancellative" => {
            build_aggregation_operator(&registry_lookup(name, pred)?, true)
        }
        "max" | "min" | "product" => {
            build_aggregation_operator(&registry_lookup(name, pred)?, false)
        }
        other => Err(InstrError::UnknownOperator(other.to_string())),
    }
}

/// The eight shipped operator names.
pub const BUILTIN_NAMES: &[&str] = &[
    "forall", "exists", "max", "min", "sum", "product", "numof", "square",
];
