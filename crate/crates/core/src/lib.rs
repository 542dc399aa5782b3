//! Core library: a small imperative language with functional arrays and
//! aggregation over array intervals, monoid-based instrumentation operators
//! that eliminate quantifiers and aggregation via ghost code, a
//! counterexample-guided search over the instrumentation space, and bounded
//! and CHC-based verification back ends.

pub mod ast;
pub mod equiv;
pub mod error;
pub mod eval;
pub mod instr;
pub mod lexer;
pub mod monoid;
pub mod normalize;
pub mod parser;
pub mod oracle;
pub mod pretty;
pub mod search;
pub mod typecheck;
pub mod value;

pub use ast::{ControlPointId, Expr, Program, Stmt, StmtKind, TypeExpr};
pub use equiv::structurally_equivalent;
pub use value::{State, Value};
