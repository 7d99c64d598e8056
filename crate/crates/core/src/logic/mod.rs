//! Propositional logic foundation: predicates, ground atoms, clauses,
//! Herbrand bases, boolean forward chaining and layered candidate-clause
//! enumeration.
//!
//! The engine is propositional. Clauses are stored over ground atoms; the
//! `X`/`Y` variables seen in printed programs are produced by the
//! pretty-printer in [`syntax`] from per-constant type guards.

mod base;
mod chain;
mod library;
pub mod syntax;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use base::{build_base, HerbrandBase};
pub use chain::{boolean_forward_chain, ForwardChainer};
pub use library::{enumerate_clauses, Body, ClauseLibrary, HeadCandidates, LibraryConfig};
pub use syntax::{ParseError, Signature};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogicError {
    #[error("vocabulary error: {0}")]
    Vocabulary(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid clause `{clause}`: {reason}")]
    InvalidClause { clause: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredicateKind {
    Extensional,
    Intensional,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
    pub kind: PredicateKind,
}

impl Predicate {
    pub fn extensional(name: impl Into<String>, arity: usize) -> Self {
        Predicate {
            name: name.into(),
            arity,
            kind: PredicateKind::Extensional,
        }
    }

    pub fn intensional(name: impl Into<String>, arity: usize) -> Self {
        Predicate {
            name: name.into(),
            arity,
            kind: PredicateKind::Intensional,
        }
    }
}

/// A predicate applied to constants. Ordering is by predicate name, then the
/// term tuple, which is the ordering every Herbrand base uses.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub terms: Vec<String>,
}

impl GroundAtom {
    pub fn nullary(predicate: impl Into<String>) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            terms: Vec::new(),
        }
    }

    pub fn unary(predicate: impl Into<String>, term: impl Into<String>) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            terms: vec![term.into()],
        }
    }

    pub fn arity(&self) -> usize {
        self.terms.len()
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.terms.is_empty() {
            write!(f, "({})", self.terms.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub atom: GroundAtom,
    pub negated: bool,
}

impl Literal {
    pub fn pos(atom: GroundAtom) -> Self {
        Literal {
            atom,
            negated: false,
        }
    }

    pub fn neg(atom: GroundAtom) -> Self {
        Literal {
            atom,
            negated: true,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("!")?;
        }
        write!(f, "{}", self.atom)
    }
}

/// `head :- body`. Bodies are kept sorted by atom so that two clauses with
/// the same meaning compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub head: GroundAtom,
    pub body: Vec<Literal>,
}

impl Clause {
    /// Builds a clause, sorting the body and checking the structural
    /// invariants that do not need a vocabulary.
    pub fn new(head: GroundAtom, mut body: Vec<Literal>) -> Result<Self, LogicError> {
        body.sort();
        let clause = Clause { head, body };
        if clause.body.is_empty() {
            return Err(clause.invalid("empty body"));
        }
        if clause.body.windows(2).any(|w| w[0] == w[1]) {
            return Err(clause.invalid("repeated body literal"));
        }
        if clause.body.iter().any(|l| l.atom == clause.head) {
            return Err(clause.invalid("head appears in its own body"));
        }
        Ok(clause)
    }

    /// Checks the vocabulary-dependent invariants: intensional head, negation
    /// only on extensional atoms, every atom known.
    pub fn validate(&self, base: &HerbrandBase) -> Result<(), LogicError> {
        match base.kind_of(&self.head) {
            Some(PredicateKind::Intensional) => {}
            Some(PredicateKind::Extensional) => return Err(self.invalid("head is extensional")),
            None => return Err(self.invalid(&format!("unknown head atom {}", self.head))),
        }
        for lit in &self.body {
            match base.kind_of(&lit.atom) {
                None => return Err(self.invalid(&format!("unknown atom {}", lit.atom))),
                Some(PredicateKind::Intensional) if lit.negated => {
                    return Err(self.invalid("negation of an intensional atom"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn invalid(&self, reason: &str) -> LogicError {
        LogicError::InvalidClause {
            clause: self.to_string(),
            reason: reason.to_string(),
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for (i, lit) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{lit}")?;
        }
        f.write_str(".")
    }
}

/// Soft truth values over a Herbrand base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationVector(pub Vec<f64>);

impl ValuationVector {
    pub fn zeros(len: usize) -> Self {
        ValuationVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn in_unit_interval(&self) -> bool {
        self.0.iter().all(|v| (0.0..=1.0).contains(v))
    }
}
