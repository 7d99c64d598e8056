//! The hybrid policy language: AST, the executable three-hole sketch,
//! clause programs and their extraction from learned weights.

pub mod ast;
mod equivalence;
mod interp;
mod policy;
mod program;

use thiserror::Error;

use crate::diff::DiffError;
use crate::gridworld::EnvError;
use crate::logic::ParseError;

pub use ast::{recognize, Cmd, Expr, FuncBody, FuncDef, Program};
pub use equivalence::{compare_on_reachable, DecisionMismatch, EquivalenceReport};
pub use interp::{
    run_sketch, DecisionRecord, HoleBinding, RunOptions, SketchExecutor, SketchProgram, StepRecord, Trace,
};
pub use policy::{HoleEval, LearnedPolicy, LiteralHole};
pub use program::{
    edit_program, extract, hole_base, oracle_program, oracle_text, ExtractedProgram, Provenance, Selector,
    DEFAULT_THRESHOLD,
};

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("unsupported program: {0}")]
    Unsupported(String),
    #[error("unbound hole: {0}")]
    Binding(String),
    #[error("vocabulary mismatch: {0}")]
    Vocabulary(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error("syntax error at {0}")]
    Syntax(ParseError),
    #[error("vocabulary mismatch: {0}")]
    Vocabulary(String),
    #[error("bad header: {0}")]
    Header(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectorError {
    #[error("empty selector")]
    Empty,
    #[error("invalid selector: {0}")]
    Invalid(String),
    #[error("selector {0} matches no clause")]
    NoMatch(String),
}
