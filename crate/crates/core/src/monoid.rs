//! Target monoids and the registry of aggregation operators.
//!
//! Every aggregation is a homomorphism from finite sequences into a target
//! monoid, determined by how it acts on singletons (`lift_singleton`), with
//! an optional finalizer mapping the carrier back to a program value. The
//! cancellative reformulations of `\exists` (via element counting) and
//! `\product` (via a product/zero-count pair) live under their own keys.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::ast::LambdaPred;
use crate::error::InstrError;
use crate::value::{State, Value};

/// Carrier element: a program value or the product-monoid pair
/// `(product of nonzero elements, number of zero elements)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Carrier {
    Val(Value),
    Pair(BigInt, BigInt),
}

impl Carrier {
    pub fn int(n: i64) -> Carrier {
        Carrier::Val(Value::int(n))
    }

    pub fn pair(p: i64, c: i64) -> Carrier {
        Carrier::Pair(BigInt::from(p), BigInt::from(c))
    }
}

impl fmt::Display for Carrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Carrier::Val(v) => write!(f, "{v}"),
            Carrier::Pair(p, c) => write!(f, "({p}, {c})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CarrierKind {
    Int,
    ExtIntNegInf,
    ExtIntPosInf,
    Bool,
    PairIntNat,
}

/// The binary operation of a registry monoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MonoidOp {
    Add,
    Mul,
    Min,
    Max,
    And,
    Or,
    PairProd,
}

#[derive(Debug, Clone, Error)]
pub enum MonoidError {
    #[error("monoid has no inverse operation")]
    NotCancellative,
    #[error("inverse undefined: {0}")]
    Partiality(String),
    #[error("carrier mismatch: {0}")]
    CarrierMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoidSpec {
    pub carrier: CarrierKind,
    pub op: MonoidOp,
    pub identity: Carrier,
    pub has_inverse: bool,
    pub commutative: bool,
}

impl MonoidSpec {
    pub fn combine(&self, a: &Carrier, b: &Carrier) -> Result<Carrier, MonoidError> {
        let mismatch = || MonoidError::CarrierMismatch(format!("{a} ∘ {b}"));
        match self.op {
            MonoidOp::Add => match (a, b) {
                (Carrier::Val(Value::Int(x)), Carrier::Val(Value::Int(y))) => {
                    Ok(Carrier::Val(Value::Int(x + y)))
                }
                _ => Err(mismatch()),
            },
            MonoidOp::Mul => match (a, b) {
                (Carrier::Val(Value::Int(x)), Carrier::Val(Value::Int(y))) => {
                    Ok(Carrier::Val(Value::Int(x * y)))
                }
                _ => Err(mismatch()),
            },
            MonoidOp::Min | MonoidOp::Max => match (a, b) {
                (Carrier::Val(x), Carrier::Val(y)) => {
                    let ord = x.ext_cmp(y).ok_or_else(mismatch)?;
                    let take_left = match self.op {
                        MonoidOp::Min => ord != std::cmp::Ordering::Greater,
                        _ => ord != std::cmp::Ordering::Less,
                    };
                    Ok(Carrier::Val(if take_left { x.clone() } else { y.clone() }))
                }
                _ => Err(mismatch()),
            },
            MonoidOp::And => match (a, b) {
                (Carrier::Val(Value::Bool(x)), Carrier::Val(Value::Bool(y))) => {
                    Ok(Carrier::Val(Value::Bool(*x && *y)))
                }
                _ => Err(mismatch()),
            },
            MonoidOp::Or => match (a, b) {
                (Carrier::Val(Value::Bool(x)), Carrier::Val(Value::Bool(y))) => {
                    Ok(Carrier::Val(Value::Bool(*x || *y)))
                }
                _ => Err(mismatch()),
            },
            MonoidOp::PairProd => match (a, b) {
                (Carrier::Pair(p1, c1), Carrier::Pair(p2, c2)) => {
                    Ok(Carrier::Pair(p1 * p2, c1 + c2))
                }
                _ => Err(mismatch()),
            },
        }
    }

    /// `inverse_combine(x ∘ y, y) = x` where defined. Only commutative
    /// monoids are registered with inverses, so one operation suffices.
    pub fn inverse_combine(&self, xy: &Carrier, y: &Carrier) -> Result<Carrier, MonoidError> {
        if !self.has_inverse {
            return Err(MonoidError::NotCancellative);
        }
        let mismatch = || MonoidError::CarrierMismatch(format!("{xy} ∘⁻¹ {y}"));
        match self.op {
            MonoidOp::Add => match (xy, y) {
                (Carrier::Val(Value::Int(s)), Carrier::Val(Value::Int(b))) => {
                    Ok(Carrier::Val(Value::Int(s - b)))
                }
                _ => Err(mismatch()),
            },
            MonoidOp::PairProd => match (xy, y) {
                (Carrier::Pair(p, c), Carrier::Pair(q, d)) => {
                    if q.is_zero() || !(p % q).is_zero() {
                        return Err(MonoidError::Partiality(format!(
                            "{q} does not divide {p}"
                        )));
                    }
                    let c2 = c - d;
                    if c2.is_negative() {
                        return Err(MonoidError::Partiality(format!(
                            "zero count would become negative: {c} - {d}"
                        )));
                    }
                    Ok(Carrier::Pair(p / q, c2))
                }
                _ => Err(mismatch()),
            },
            _ => Err(MonoidError::NotCancellative),
        }
    }
}

/// How the homomorphism acts on a singleton sequence element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SingletonMap {
    /// `⟨x⟩ ↦ x`
    Identity,
    /// `⟨(x, i)⟩ ↦ P(x, i)`
    PredBool(LambdaPred),
    /// `⟨(x, i)⟩ ↦ P(x, i) ? 1 : 0`
    PredCount(LambdaPred),
    /// `⟨x⟩ ↦ x ≠ 0 ? (x, 0) : (1, 1)`
    ProdPair,
}

/// Finalizer `g` from the instrumentation carrier to a program value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Finalizer {
    Identity,
    /// `g(c) = c > 0`
    ExistsPositive,
    /// `g((p, c)) = c == 0 ? p : 0`
    ProdPair,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatorSpec {
    pub name: String,
    pub monoid: MonoidSpec,
    pub singleton: SingletonMap,
    pub finalize: Finalizer,
    /// Whether the homomorphism consumes (value, index) pairs.
    pub indexed: bool,
    pub pred_param: bool,
}

impl AggregatorSpec {
    pub fn pred(&self) -> Option<&LambdaPred> {
        match &self.singleton {
            SingletonMap::PredBool(p) | SingletonMap::PredCount(p) => Some(p),
            _ => None,
        }
    }
}

/// Evaluate a lambda predicate at a concrete (value, index) pair in a state.
/// Implemented via the expression evaluator; free variables other than the
/// binders resolve against `s`.
pub fn eval_pred(
    pred: &LambdaPred,
    x: &Value,
    i: &BigInt,
    s: &State,
) -> Result<bool, crate::eval::EvalErrorKind> {
    crate::eval::eval_pred_at(pred, x, i, s)
}

/// `h(⟨x⟩)` or `h(⟨(x, i)⟩)`. The index must be supplied iff the aggregator
/// is indexed.
pub fn lift_singleton(
    agg: &AggregatorSpec,
    x: &Value,
    i: Option<&BigInt>,
    s: &State,
) -> Result<Carrier, crate::eval::EvalErrorKind> {
    debug_assert_eq!(agg.indexed, i.is_some());
    match &agg.singleton {
        SingletonMap::Identity => Ok(Carrier::Val(x.clone())),
        SingletonMap::PredBool(p) => {
            let i = i.expect("indexed aggregator");
            Ok(Carrier::Val(Value::Bool(eval_pred(p, x, i, s)?)))
        }
        SingletonMap::PredCount(p) => {
            let i = i.expect("indexed aggregator");
            let b = eval_pred(p, x, i, s)?;
            Ok(Carrier::int(if b { 1 } else { 0 }))
        }
        SingletonMap::ProdPair => match x {
            Value::Int(n) if n.is_zero() => Ok(Carrier::pair(1, 1)),
            Value::Int(n) => Ok(Carrier::Pair(n.clone(), BigInt::zero())),
            other => Err(crate::eval::EvalErrorKind::TypeMismatch(format!(
                "product over non-integer element {other}"
            ))),
        },
    }
}

/// Apply the finalizer `g` (identity when none).
pub fn finalize(agg: &AggregatorSpec, v: &Carrier) -> Result<Value, MonoidError> {
    match (agg.finalize, v) {
        (Finalizer::Identity, Carrier::Val(x)) => Ok(x.clone()),
        (Finalizer::ExistsPositive, Carrier::Val(Value::Int(c))) => {
            Ok(Value::Bool(c.is_positive()))
        }
        (Finalizer::ProdPair, Carrier::Pair(p, c)) => Ok(if c.is_zero() {
            Value::Int(p.clone())
        } else {
            Value::int(0)
        }),
        _ => Err(MonoidError::CarrierMismatch(format!(
            "finalizer of {} applied to {v}",
            agg.name
        ))),
    }
}

fn int_monoid(op: MonoidOp, identity: i64, has_inverse: bool) -> MonoidSpec {
    MonoidSpec {
        carrier: CarrierKind::Int,
        op,
        identity: Carrier::int(identity),
        has_inverse,
        commutative: true,
    }
}

/// All registry keys, in a stable order.
pub const REGISTRY_NAMES: &[&str] = &[
    "sum",
    "min",
    "max",
    "product",
    "numof",
    "forall",
    "exists",
    "exists-cancellative",
    "product-cancellative",
];

/// Look up an aggregator by registry name. Predicate-parameterized
/// aggregators require `pred`.
pub fn registry_lookup(name: &str, pred: Option<&LambdaPred>) -> Result<AggregatorSpec, InstrError> {
    let needs_pred = matches!(
        name,
        "numof" | "forall" | "exists" | "exists-cancellative"
    );
    if needs_pred && pred.is_none() {
        return Err(InstrError::UnknownAggregator(format!(
            "{name} requires a predicate"
        )));
    }
    let pred = pred.cloned();
    let spec = match name {
        "sum" => AggregatorSpec {
            name: name.into(),
            monoid: int_monoid(MonoidOp::Add, 0, true),
            singleton: SingletonMap::Identity,
            finalize: Finalizer::Identity,
            indexed: false,
            pred_param: false,
        },
        "min" => AggregatorSpec {
            name: name.into(),
            monoid: MonoidSpec {
                carrier: CarrierKind::ExtIntPosInf,
                op: MonoidOp::Min,
                identity: Carrier::Val(Value::PosInf),
                has_inverse: false,
                commutative: true,
            },
            singleton: SingletonMap::Identity,
            finalize: Finalizer::Identity,
            indexed: false,
            pred_param: false,
        },
        "max" => AggregatorSpec {
            name: name.into(),
            monoid: MonoidSpec {
                carrier: CarrierKind::ExtIntNegInf,
                op: MonoidOp::Max,
                identity: Carrier::Val(Value::NegInf),
                has_inverse: false,
                commutative: true,
            },
            singleton: SingletonMap::Identity,
            finalize: Finalizer::Identity,
            indexed: false,
            pred_param: false,
        },
        "product" => AggregatorSpec {
            name: name.into(),
            monoid: int_monoid(MonoidOp::Mul, 1, false),
            singleton: SingletonMap::Identity,
            finalize: Finalizer::Identity,
            indexed: false,
            pred_param: false,
        },
        "numof" => AggregatorSpec {
            name: name.into(),
            monoid: int_monoid(MonoidOp::Add, 0, true),
            singleton: SingletonMap::PredCount(pred.unwrap()),
            finalize: Finalizer::Identity,
            indexed: true,
            pred_param: true,
        },
        "forall" => AggregatorSpec {
            name: name.into(),
            monoid: MonoidSpec {
                carrier: CarrierKind::Bool,
                op: MonoidOp::And,
                identity: Carrier::Val(Value::Bool(true)),
                has_inverse: false,
                commutative: true,
            },
            singleton: SingletonMap::PredBool(pred.unwrap()),
            finalize: Finalizer::Identity,
            indexed: true,
            pred_param: true,
        },
        "exists" => AggregatorSpec {
            name: name.into(),
            monoid: MonoidSpec {
                carrier: CarrierKind::Bool,
                op: MonoidOp::Or,
                identity: Carrier::Val(Value::Bool(false)),
                has_inverse: false,
                commutative: true,
            },
            singleton: SingletonMap::PredBool(pred.unwrap()),
            finalize: Finalizer::Identity,
            indexed: true,
            pred_param: true,
        },
        "exists-cancellative" => AggregatorSpec {
            name: name.into(),
            monoid: int_monoid(MonoidOp::Add, 0, true),
            singleton: SingletonMap::PredCount(pred.unwrap()),
            finalize: Finalizer::ExistsPositive,
            indexed: true,
            pred_param: true,
        },
        "product-cancellative" => AggregatorSpec {
            name: name.into(),
            monoid: MonoidSpec {
                carrier: CarrierKind::PairIntNat,
                op: MonoidOp::PairProd,
                identity: Carrier::pair(1, 0),
                has_inverse: true,
                commutative: true,
            },
            singleton: SingletonMap::ProdPair,
            finalize: Finalizer::ProdPair,
            indexed: false,
            pred_param: false,
        },
        other => return Err(InstrError::UnknownAggregator(other.into())),
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn sample(rng: &mut StdRng, kind: CarrierKind) -> Carrier {
        match kind {
            CarrierKind::Int => Carrier::int(rng.gen_range(-50..=50)),
            CarrierKind::Bool => Carrier::Val(Value::Bool(rng.gen())),
            CarrierKind::ExtIntNegInf => {
                if rng.gen_ratio(1, 10) {
                    Carrier::Val(Value::NegInf)
                } else {
                    Carrier::int(rng.gen_range(-50..=50))
                }
            }
            CarrierKind::ExtIntPosInf => {
                if rng.gen_ratio(1, 10) {
                    Carrier::Val(Value::PosInf)
                } else {
                    Carrier::int(rng.gen_range(-50..=50))
                }
            }
            CarrierKind::PairIntNat => {
                let p: i64 = loop {
                    let p = rng.gen_range(-9..=9);
                    if p != 0 {
                        break p;
                    }
                };
                Carrier::pair(p, rng.gen_range(0..=4))
            }
        }
    }

    #[test]
    fn monoid_laws_hold_on_random_samples() {
        let dummy = LambdaPred::new("x", "i", crate::ast::Expr::BoolLit(true));
        let mut rng = StdRng::seed_from_u64(7);
        for name in REGISTRY_NAMES {
            let agg = registry_lookup(name, Some(&dummy)).unwrap();
            let m = &agg.monoid;
            for _ in 0..10_000 {
                let a = sample(&mut rng, m.carrier);
                let b = sample(&mut rng, m.carrier);
                let c = sample(&mut rng, m.carrier);
                // associativity
                let ab_c = m.combine(&m.combine(&a, &b).unwrap(), &c).unwrap();
                let a_bc = m.combine(&a, &m.combine(&b, &c).unwrap()).unwrap();
                assert_eq!(ab_c, a_bc, "{name}: associativity");
                // identity
                assert_eq!(m.combine(&a, &m.identity).unwrap(), a, "{name}: right id");
                assert_eq!(m.combine(&m.identity, &a).unwrap(), a, "{name}: left id");
                // commutativity
                if m.commutative {
                    assert_eq!(
                        m.combine(&a, &b).unwrap(),
                        m.combine(&b, &a).unwrap(),
                        "{name}: commutativity"
                    );
                }
                // cancellation
                if m.has_inverse {
                    let ab = m.combine(&a, &b).unwrap();
                    assert_eq!(m.inverse_combine(&ab, &b).unwrap(), a, "{name}: inverse");
                }
            }
        }
    }

    #[test]
    fn combine_examples() {
        let dummy = LambdaPred::new("x", "i", crate::ast::Expr::BoolLit(true));
        let max = registry_lookup("max", None).unwrap();
        assert_eq!(
            max.monoid
                .combine(&Carrier::Val(Value::NegInf), &Carrier::int(5))
                .unwrap(),
            Carrier::int(5)
        );
        let prod = registry_lookup("product-cancellative", None).unwrap();
        assert_eq!(
            prod.monoid
                .combine(&Carrier::pair(2, 0), &Carrier::pair(3, 1))
                .unwrap(),
            Carrier::pair(6, 1)
        );
        let sum = registry_lookup("sum", None).unwrap();
        assert_eq!(
            sum.monoid
                .combine(&Carrier::int(4), &Carrier::int(3))
                .unwrap(),
            Carrier::int(7)
        );
        let numof = registry_lookup("numof", Some(&dummy)).unwrap();
        assert_eq!(
            numof
                .monoid
                .inverse_combine(&Carrier::int(5), &Carrier::int(1))
                .unwrap(),
            Carrier::int(4)
        );
        assert_eq!(
            sum.monoid
                .inverse_combine(&Carrier::int(7), &Carrier::int(3))
                .unwrap(),
            Carrier::int(4)
        );
        // solve (p, c) ∘ (3, 1) = (6, 1)
        assert_eq!(
            prod.monoid
                .inverse_combine(&Carrier::pair(6, 1), &Carrier::pair(3, 1))
                .unwrap(),
            Carrier::pair(2, 0)
        );
        assert!(matches!(
            max.monoid.inverse_combine(&Carrier::int(5), &Carrier::int(3)),
            Err(MonoidError::NotCancellative)
        ));
    }

    #[test]
    fn finalizer_examples() {
        let dummy = LambdaPred::new("x", "i", crate::ast::Expr::BoolLit(true));
        let ex = registry_lookup("exists-cancellative", Some(&dummy)).unwrap();
        assert_eq!(finalize(&ex, &Carrier::int(0)).unwrap(), Value::Bool(false));
        assert_eq!(finalize(&ex, &Carrier::int(3)).unwrap(), Value::Bool(true));
        let prod = registry_lookup("product-cancellative", None).unwrap();
        assert_eq!(finalize(&prod, &Carrier::pair(6, 1)).unwrap(), Value::int(0));
        assert_eq!(finalize(&prod, &Carrier::pair(6, 0)).unwrap(), Value::int(6));
        let sum = registry_lookup("sum", None).unwrap();
        assert_eq!(finalize(&sum, &Carrier::int(6)).unwrap(), Value::int(6));
    }

    #[test]
    fn lift_examples() {
        use crate::ast::Expr;
        let s = State::new();
        // numof with P = (x == i)
        let p = LambdaPred::new("x", "i", Expr::eq(Expr::var("x"), Expr::var("i")));
        let numof = registry_lookup("numof", Some(&p)).unwrap();
        assert_eq!(
            lift_singleton(&numof, &Value::int(5), Some(&BigInt::from(5)), &s).unwrap(),
            Carrier::int(1)
        );
        let prod = registry_lookup("product-cancellative", None).unwrap();
        assert_eq!(
            lift_singleton(&prod, &Value::int(0), None, &s).unwrap(),
            Carrier::pair(1, 1)
        );
        let sum = registry_lookup("sum", None).unwrap();
        assert_eq!(
            lift_singleton(&sum, &Value::int(9), None, &s).unwrap(),
            Carrier::int(9)
        );
    }

    #[test]
    fn registry_rows() {
        let p = LambdaPred::new("x", "i", crate::ast::Expr::BoolLit(true));
        let max = registry_lookup("max", None).unwrap();
        assert_eq!(max.monoid.op, MonoidOp::Max);
        assert_eq!(max.monoid.identity, Carrier::Val(Value::NegInf));
        assert!(!max.indexed);

        let fa = registry_lookup("forall", Some(&p)).unwrap();
        assert_eq!(fa.monoid.op, MonoidOp::And);
        assert_eq!(fa.monoid.identity, Carrier::Val(Value::Bool(true)));
        assert!(fa.indexed);

        let exc = registry_lookup("exists-cancellative", Some(&p)).unwrap();
        assert_eq!(exc.monoid.op, MonoidOp::Add);
        assert_eq!(exc.finalize, Finalizer::ExistsPositive);
        assert!(exc.monoid.has_inverse);

        assert!(registry_lookup("gibberish", None).is_err());
        assert!(registry_lookup("forall", None).is_err());
    }
}
