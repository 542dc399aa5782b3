//! Verification back ends: the exhaustive bounded checker and the CHC
//! exporter with an external Horn-solver client, plus witness and
//! counterexample back-translation.

pub mod bounded;
pub mod chc;
pub mod solver;
pub mod witness;

use crate::ast::Program;
use crate::error::OracleError;
use crate::eval::Trace;

pub use bounded::{check_bounded, BoundedDomain, BoundedOracle};
pub use witness::{back_translate_cex, back_translate_witness, WitnessEntry, WitnessFormula};

#[derive(Debug, Clone)]
pub enum OracleVerdict {
    Correct { witness: Option<WitnessFormula> },
    Incorrect { trace: Trace },
    Unknown { reason: String },
}

impl OracleVerdict {
    pub fn kind(&self) -> &'static str {
        match self {
            OracleVerdict::Correct { .. } => "correct",
            OracleVerdict::Incorrect { .. } => "incorrect",
            OracleVerdict::Unknown { .. } => "unknown",
        }
    }
}

/// Budget escalation level; each level doubles the underlying resource
/// (steps and path counts for the bounded oracle, wall-clock for solvers).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct OracleBudget {
    pub level: u32,
}

impl OracleBudget {
    pub fn scale(&self, base: u64) -> u64 {
        base.saturating_mul(1u64 << self.level.min(32))
    }

    pub fn escalated(&self) -> OracleBudget {
        OracleBudget {
            level: self.level + 1,
        }
    }
}

/// A correctness checker consumed by the instrumentation search.
pub trait Oracle: Sync {
    fn check(&self, p: &Program, budget: OracleBudget) -> Result<OracleVerdict, OracleError>;

    fn name(&self) -> &'static str;
}
