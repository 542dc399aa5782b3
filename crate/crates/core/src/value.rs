//! Runtime values and states.
//!
//! Arrays are functional: a default value plus finitely many overrides, kept
//! canonical (no override equals the default), so structural equality is
//! extensional equality. `NegInf`/`PosInf` are the extended-integer carrier
//! sentinels; ordinary programs never compute them except as the value of an
//! extremal aggregation over an empty interval.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::ast::TypeExpr;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
    Array(FunArray),
    NegInf,
    PosInf,
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Int(BigInt::from(n))
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    /// Default value of a type: 0, false, or a constant array of defaults.
    pub fn default_of(ty: &TypeExpr) -> Value {
        match ty {
            TypeExpr::Int => Value::int(0),
            TypeExpr::Bool => Value::Bool(false),
            TypeExpr::Array(elem) => Value::Array(FunArray::constant(Value::default_of(elem))),
        }
    }

    /// Total order on extended integers; `None` when either side is not an
    /// extended integer.
    pub fn ext_cmp(&self, other: &Value) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering::*;
        let rank = |v: &Value| match v {
            Value::NegInf => Some(0u8),
            Value::Int(_) => Some(1),
            Value::PosInf => Some(2),
            _ => None,
        };
        let (ra, rb) = (rank(self)?, rank(other)?);
        if ra != rb {
            return Some(ra.cmp(&rb));
        }
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            _ => Some(Equal),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::NegInf => write!(f, "neginf"),
            Value::PosInf => write!(f, "posinf"),
            Value::Array(a) => {
                write!(f, "const({})", a.default)?;
                for (i, v) in &a.overrides {
                    write!(f, "[{i} := {v}]")?;
                }
                Ok(())
            }
        }
    }
}

/// Functional array in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunArray {
    pub default: Box<Value>,
    pub overrides: BTreeMap<BigInt, Value>,
}

impl FunArray {
    pub fn constant(default: Value) -> FunArray {
        FunArray {
            default: Box::new(default),
            overrides: BTreeMap::new(),
        }
    }

    pub fn select(&self, index: &BigInt) -> Value {
        self.overrides
            .get(index)
            .cloned()
            .unwrap_or_else(|| (*self.default).clone())
    }

    pub fn store(&self, index: BigInt, value: Value) -> FunArray {
        let mut out = self.clone();
        if value == *out.default {
            out.overrides.remove(&index);
        } else {
            out.overrides.insert(index, value);
        }
        out
    }
}

/// Variable bindings. Immutable snapshots of states are cheap enough at the
/// scale this crate targets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct State {
    bindings: BTreeMap<String, Value>,
}

impl State {
    pub fn new() -> State {
        State::default()
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.bindings.get(name)
    }

    pub fn set(&mut self, name: impl Into<String>, value: Value) {
        self.bindings.insert(name.into(), value);
    }

    pub fn remove(&mut self, name: &str) {
        self.bindings.remove(name);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.bindings.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.bindings.keys()
    }

    /// Restriction to a set of variables (used to project away ghost state).
    pub fn restrict(&self, keep: impl Fn(&str) -> bool) -> State {
        State {
            bindings: self
                .bindings
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

impl FromIterator<(String, Value)> for State {
    fn from_iter<T: IntoIterator<Item = (String, Value)>>(iter: T) -> Self {
        State {
            bindings: iter.into_iter().collect(),
        }
    }
}

// JSON forms used by trace export: integers as numbers when they fit i64,
// otherwise decimal strings; infinities as "-inf"/"+inf"; arrays as
// {"default": v, "entries": {index: v}}.
impl Serialize for Value {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(n) => serialize_bigint(n, ser),
            Value::Bool(b) => ser.serialize_bool(*b),
            Value::NegInf => ser.serialize_str("-inf"),
            Value::PosInf => ser.serialize_str("+inf"),
            Value::Array(a) => {
                let mut map = ser.serialize_map(Some(2))?;
                map.serialize_entry("default", &*a.default)?;
                let entries: BTreeMap<String, &Value> = a
                    .overrides
                    .iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect();
                map.serialize_entry("entries", &entries)?;
                map.end()
            }
        }
    }
}

fn serialize_bigint<S: Serializer>(n: &BigInt, ser: S) -> Result<S::Ok, S::Error> {
    match i64::try_from(n) {
        Ok(v) => ser.serialize_i64(v),
        Err(_) => ser.serialize_str(&n.to_string()),
    }
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut map = ser.serialize_map(Some(self.bindings.len()))?;
        for (k, v) in &self.bindings {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}
