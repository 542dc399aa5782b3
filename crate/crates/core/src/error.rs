//! Error types shared across the crate.

use thiserror::Error;

use crate::lexer::Pos;

#[derive(Debug, Clone, Error)]
#[error("syntax error at {line}:{col}: expected {expected}{}", found.as_deref().map(|f| format!(", found {f}")).unwrap_or_default())]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    /// Human-readable expected-token set.
    pub expected: String,
    pub found: Option<String>,
}

impl ParseError {
    pub fn syntax(pos: Pos, expected: impl Into<String>) -> ParseError {
        ParseError {
            line: pos.line,
            col: pos.col,
            expected: expected.into(),
            found: None,
        }
    }

    pub fn with_found(mut self, found: String) -> ParseError {
        self.found = Some(found);
        self
    }
}

#[derive(Debug, Clone, Error)]
#[error("type error at statement {point}: expected {expected}, found {found} in `{context}`")]
pub struct TypeError {
    /// Control point of the enclosing statement.
    pub point: crate::ast::ControlPointId,
    pub expected: String,
    pub found: String,
    /// Pretty-printed offending expression or statement fragment.
    pub context: String,
}

#[derive(Debug, Error)]
pub enum InstrError {
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("unknown aggregator `{0}`")]
    UnknownAggregator(String),
    #[error("monoid is not cancellative: {0}")]
    NotCancellative(String),
    #[error("ghost name `{0}` clashes with the program vocabulary")]
    GhostNameClash(String),
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
    #[error("operator file error: {0}")]
    OperatorFile(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("failed to launch solver `{cmd}`: {reason}")]
    SolverLaunch { cmd: String, reason: String },
    #[error("failed to parse solver output: {0}")]
    SolverOutputParse(String),
    #[error("unsupported node in CHC encoding: {0}")]
    UnsupportedNode(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("the failing assertion was added by instrumentation")]
    NotOriginalAssertion,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("oracle failure while checking a candidate: {0}")]
    OracleFailure(#[from] OracleError),
    #[error(transparent)]
    Instr(#[from] InstrError),
}
