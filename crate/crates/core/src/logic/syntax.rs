//! Clause text grammar.
//!
//! ```text
//! clause  := atom ":-" literal ("," literal)* "."
//! literal := ["!"] atom
//! atom    := ident [ "(" [term] ")" ]
//! ```
//!
//! `#` starts a comment line. Lower-case terms are constants, upper-case
//! terms are variables. A variable must be bound by a type guard such as
//! `is_agent(X)`, which names exactly one constant; the printer emits the
//! same form, so `!has_key(agent)` prints as `!has_key(X), is_agent(X)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use super::{Clause, GroundAtom, HerbrandBase, Literal, PredicateKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Vocabulary,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Predicates, constants and type guards known to a parser or printer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Signature {
    predicates: BTreeMap<String, (usize, PredicateKind)>,
    constants: BTreeSet<String>,
    guard_of_constant: BTreeMap<String, String>,
    constant_of_guard: BTreeMap<String, String>,
}

impl Signature {
    /// Predicates and constants are read off the base. `guards` maps a
    /// constant to the unary predicate that names it in printed programs.
    pub fn from_base<'a>(
        base: &HerbrandBase,
        guards: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Self {
        let mut sig = Signature::default();
        for (i, a) in base.atoms().iter().enumerate() {
            sig.predicates
                .insert(a.predicate.clone(), (a.arity(), base.kind(i)));
            sig.constants.extend(a.terms.iter().cloned());
        }
        for (c, g) in guards {
            sig.add_guard(c, g);
        }
        sig
    }

    pub fn add_guard(&mut self, constant: &str, guard: &str) {
        self.constants.insert(constant.to_string());
        self.guard_of_constant
            .insert(constant.to_string(), guard.to_string());
        self.constant_of_guard
            .insert(guard.to_string(), constant.to_string());
    }

    /// Merges another signature into this one.
    pub fn merge(&mut self, other: &Signature) {
        self.predicates
            .extend(other.predicates.iter().map(|(k, v)| (k.clone(), *v)));
        self.constants.extend(other.constants.iter().cloned());
        for (c, g) in &other.guard_of_constant {
            self.add_guard(c, g);
        }
    }

    pub fn kind(&self, predicate: &str) -> Option<PredicateKind> {
        self.predicates.get(predicate).map(|(_, k)| *k)
    }

    pub fn knows_atom(&self, atom: &GroundAtom) -> bool {
        match self.predicates.get(&atom.predicate) {
            Some((arity, _)) => {
                *arity == atom.arity() && atom.terms.iter().all(|t| self.constants.contains(t))
            }
            None => false,
        }
    }

    /// Prints a clause with guard-bound variables.
    pub fn print_clause(&self, clause: &Clause) -> String {
        let mut vars: BTreeMap<&str, String> = BTreeMap::new();
        let mut next = 0usize;
        let mut parts: Vec<String> = Vec::new();
        for lit in &clause.body {
            let mut fresh = Vec::new();
            let terms: Vec<String> = lit
                .atom
                .terms
                .iter()
                .map(|t| match self.guard_of_constant.get(t) {
                    Some(_) => vars
                        .entry(t.as_str())
                        .or_insert_with(|| {
                            let v = variable_name(next);
                            next += 1;
                            fresh.push(t.clone());
                            v
                        })
                        .clone(),
                    None => t.clone(),
                })
                .collect();
            let mut s = String::new();
            if lit.negated {
                s.push('!');
            }
            s.push_str(&lit.atom.predicate);
            if !terms.is_empty() {
                s.push('(');
                s.push_str(&terms.join(", "));
                s.push(')');
            }
            parts.push(s);
            for c in fresh {
                parts.push(format!("{}({})", self.guard_of_constant[&c], vars[c.as_str()]));
            }
        }
        format!("{} :- {}.", clause.head, parts.join(", "))
    }

    pub fn parse_clause(&self, text: &str) -> Result<Clause, ParseError> {
        self.parse_line(text, 1)
    }

    /// Parses one clause per non-blank, non-comment line.
    pub fn parse_clauses(&self, text: &str) -> Result<Vec<Clause>, ParseError> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            out.push(self.parse_line(line, i + 1)?);
        }
        Ok(out)
    }

    pub(crate) fn parse_line(&self, text: &str, line: usize) -> Result<Clause, ParseError> {
        let raw = RawParser::new(text, line).clause()?;
        self.resolve(raw, line)
    }

    fn resolve(&self, raw: RawClause, line: usize) -> Result<Clause, ParseError> {
        let vocab_err = |column: usize, message: String| ParseError {
            kind: ParseErrorKind::Vocabulary,
            line,
            column,
            message,
        };
        let mut bindings: BTreeMap<String, String> = BTreeMap::new();
        let mut body_raw = Vec::new();
        for lit in raw.body {
            if let Some(constant) = self.constant_of_guard.get(&lit.atom.predicate) {
                if lit.negated {
                    return Err(vocab_err(lit.column, format!("type guard `{}` cannot be negated", lit.atom.predicate)));
                }
                let [term] = lit.atom.terms.as_slice() else {
                    return Err(vocab_err(lit.column, format!("type guard `{}` takes one term", lit.atom.predicate)));
                };
                if is_variable(term) {
                    if let Some(prev) = bindings.insert(term.clone(), constant.clone()) {
                        if prev != *constant {
                            return Err(vocab_err(lit.column, format!("variable {term} bound to both {prev} and {constant}")));
                        }
                    }
                } else if term != constant {
                    return Err(vocab_err(lit.column, format!("guard {}({term}) is always false", lit.atom.predicate)));
                }
            } else {
                body_raw.push(lit);
            }
        }
        let ground = |atom: &RawAtom| -> Result<GroundAtom, ParseError> {
            let mut terms = Vec::new();
            for t in &atom.terms {
                if is_variable(t) {
                    match bindings.get(t) {
                        Some(c) => terms.push(c.clone()),
                        None => return Err(vocab_err(atom.column, format!("variable {t} has no type guard"))),
                    }
                } else {
                    terms.push(t.clone());
                }
            }
            let g = GroundAtom {
                predicate: atom.predicate.clone(),
                terms,
            };
            if !self.knows_atom(&g) {
                return Err(vocab_err(atom.column, format!("unknown predicate or atom `{g}`")));
            }
            Ok(g)
        };
        let head = ground(&raw.head)?;
        if self.kind(&head.predicate) != Some(PredicateKind::Intensional) {
            return Err(vocab_err(raw.head.column, format!("head `{head}` is not intensional")));
        }
        let mut body = Vec::new();
        for lit in &body_raw {
            let atom = ground(&lit.atom)?;
            if lit.negated && self.kind(&atom.predicate) != Some(PredicateKind::Extensional) {
                return Err(vocab_err(lit.column, format!("negation of intensional atom `{atom}`")));
            }
            body.push(Literal {
                atom,
                negated: lit.negated,
            });
        }
        if body.is_empty() {
            return Err(vocab_err(raw.head.column, "body holds only type guards".into()));
        }
        Clause::new(head, body).map_err(|e| vocab_err(1, e.to_string()))
    }
}

fn variable_name(i: usize) -> String {
    const NAMES: [&str; 6] = ["X", "Y", "Z", "W", "V", "U"];
    let base = NAMES[i % NAMES.len()];
    match i / NAMES.len() {
        0 => base.to_string(),
        k => format!("{base}{k}"),
    }
}

fn is_variable(term: &str) -> bool {
    term.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

struct RawAtom {
    predicate: String,
    terms: Vec<String>,
    column: usize,
}

struct RawLiteral {
    atom: RawAtom,
    negated: bool,
    column: usize,
}

struct RawClause {
    head: RawAtom,
    body: Vec<RawLiteral>,
}

struct RawParser<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> RawParser<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        RawParser {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Syntax,
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        self.skip_ws();
        for (i, c) in s.chars().enumerate() {
            if self.chars.get(self.pos + i) != Some(&c) {
                return Err(self.err(format!("expected `{s}`")));
            }
        }
        self.pos += s.chars().count();
        Ok(())
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            Some(c) => return Err(self.err(format!("expected identifier, found `{c}`"))),
            None => return Err(self.err("expected identifier, found end of line")),
        }
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn atom(&mut self) -> Result<RawAtom, ParseError> {
        self.skip_ws();
        let column = self.pos + 1;
        let predicate = self.ident()?;
        let mut terms = Vec::new();
        self.skip_ws();
        if self.peek() == Some('(') {
            self.pos += 1;
            self.skip_ws();
            if self.peek() != Some(')') {
                terms.push(self.ident()?);
                self.skip_ws();
                if self.peek() == Some(',') {
                    return Err(self.err("only nullary and unary atoms are supported"));
                }
            }
            self.expect(")")?;
        }
        Ok(RawAtom {
            predicate,
            terms,
            column,
        })
    }

    fn literal(&mut self) -> Result<RawLiteral, ParseError> {
        self.skip_ws();
        let column = self.pos + 1;
        let negated = matches!(self.peek(), Some('!') | Some('¬'));
        if negated {
            self.pos += 1;
        }
        self.skip_ws();
        if matches!(self.peek(), Some('.') | Some(',') | None) {
            return Err(self.err("expected a body literal"));
        }
        let atom = self.atom()?;
        Ok(RawLiteral {
            atom,
            negated,
            column,
        })
    }

    fn clause(&mut self) -> Result<RawClause, ParseError> {
        let head = self.atom()?;
        self.expect(":-")?;
        let mut body = vec![self.literal()?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                    body.push(self.literal()?);
                }
                Some('.') => {
                    self.pos += 1;
                    break;
                }
                Some(c) => return Err(self.err(format!("expected `,` or `.`, found `{c}`"))),
                None => return Err(self.err("missing terminating `.`")),
            }
        }
        self.skip_ws();
        if let Some(c) = self.peek() {
            return Err(self.err(format!("unexpected `{c}` after clause")));
        }
        Ok(RawClause { head, body })
    }
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax => f.write_str("syntax error"),
            ParseErrorKind::Vocabulary => f.write_str("vocabulary error"),
        }
    }
}
