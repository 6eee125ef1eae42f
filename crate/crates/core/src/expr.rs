//! Boolean formulae over ontology atoms.
//!
//! Concrete syntax:
//!
//! ```text
//! expr    := or
//! or      := and ( '|' and )*
//! and     := unary ( '&' unary )*
//! unary   := ('!' | '¬') unary | primary
//! primary := '{' Concept '.' State '}' | 'true' | 'false' | '(' expr ')'
//! ```
//!
//! Whitespace outside braces is insignificant. Inside braces the text is
//! split at the last `.`; both halves are trimmed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A `Concept.State` pair drawn from an ontology's has-state arcs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    concept: String,
    state: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AtomError {
    #[error("atom {0:?} has an empty concept or state name")]
    Empty(String),
    #[error("atom name {0:?} contains a reserved character ('.', '{{' or '}}')")]
    ReservedChar(String),
    #[error("atom {0:?} has no '.' separating concept from state")]
    MissingDot(String),
}

fn check_name(name: &str) -> Result<String, AtomError> {
    let trimmed = name.trim();
    if trimmed.is_empty() {
        return Err(AtomError::Empty(name.to_string()));
    }
    if trimmed.contains(['.', '{', '}']) {
        return Err(AtomError::ReservedChar(trimmed.to_string()));
    }
    Ok(trimmed.to_string())
}

impl Atom {
    pub fn new(concept: &str, state: &str) -> Result<Self, AtomError> {
        Ok(Atom {
            concept: check_name(concept)?,
            state: check_name(state)?,
        })
    }

    /// Parses the text between braces, e.g. `Feedwater Tank.underflows`.
    pub fn from_inner(text: &str) -> Result<Self, AtomError> {
        let (concept, state) = text
            .rsplit_once('.')
            .ok_or_else(|| AtomError::MissingDot(text.to_string()))?;
        Atom::new(concept, state)
    }

    pub fn concept(&self) -> &str {
        &self.concept
    }

    pub fn state(&self) -> &str {
        &self.state
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}.{}}}", self.concept, self.state)
    }
}

/// An element of B(Σ): constants, atoms, and the connectives `!`, `&`, `|`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoolExpr {
    True,
    False,
    Atom(Atom),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unmapped atom {0}")]
pub struct MissingAtom(pub Atom);

impl BoolExpr {
    pub fn atom(a: Atom) -> Self {
        BoolExpr::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: BoolExpr) -> Self {
        BoolExpr::Not(Box::new(e))
    }

    pub fn and(l: BoolExpr, r: BoolExpr) -> Self {
        BoolExpr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: BoolExpr, r: BoolExpr) -> Self {
        BoolExpr::Or(Box::new(l), Box::new(r))
    }

    /// Left-associated conjunction of `parts`; TRUE when empty.
    pub fn conjoin<'a, I>(parts: I) -> BoolExpr
    where
        I: IntoIterator<Item = &'a BoolExpr>,
    {
        parts
            .into_iter()
            .cloned()
            .reduce(BoolExpr::and)
            .unwrap_or(BoolExpr::True)
    }

    /// Evaluates against an explicit valuation.
    pub fn eval(&self, valuation: &BTreeMap<Atom, bool>) -> Result<bool, MissingAtom> {
        self.eval_with(&mut |a| valuation.get(a).copied())
    }

    /// Evaluates with a lookup callback. Both operands of every binary node
    /// are visited, so a missing atom is reported even where short-circuit
    /// evaluation would have skipped it; the first one in left-to-right order
    /// wins.
    pub fn eval_with<F>(&self, lookup: &mut F) -> Result<bool, MissingAtom>
    where
        F: FnMut(&Atom) -> Option<bool>,
    {
        match self {
            BoolExpr::True => Ok(true),
            BoolExpr::False => Ok(false),
            BoolExpr::Atom(a) => lookup(a).ok_or_else(|| MissingAtom(a.clone())),
            BoolExpr::Not(e) => Ok(!e.eval_with(lookup)?),
            BoolExpr::And(l, r) => {
                let l = l.eval_with(lookup)?;
                let r = r.eval_with(lookup)?;
                Ok(l && r)
            }
            BoolExpr::Or(l, r) => {
                let l = l.eval_with(lookup)?;
                let r = r.eval_with(lookup)?;
                Ok(l || r)
            }
        }
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Atom(a) => {
                out.insert(a.clone());
            }
            BoolExpr::Not(e) => e.collect_atoms(out),
            BoolExpr::And(l, r) | BoolExpr::Or(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }

    /// Fully parenthesized rendering that [`parse_expr`] maps back to `self`.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        self.write_canonical(&mut s);
        s
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            BoolExpr::True => out.push_str("true"),
            BoolExpr::False => out.push_str("false"),
            BoolExpr::Atom(a) => out.push_str(&a.to_string()),
            BoolExpr::Not(e) => {
                out.push_str("!(");
                e.write_canonical(out);
                out.push(')');
            }
            BoolExpr::And(l, r) | BoolExpr::Or(l, r) => {
                let op = if matches!(self, BoolExpr::And(..)) {
                    " & "
                } else {
                    " | "
                };
                out.push('(');
                l.write_canonical(out);
                out.push_str(op);
                r.write_canonical(out);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl From<Atom> for BoolExpr {
    fn from(a: Atom) -> Self {
        BoolExpr::Atom(a)
    }
}

impl std::str::FromStr for BoolExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

impl Serialize for BoolExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for BoolExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_expr(&text).map_err(serde::de::Error::custom)
    }
}

/// Syntax error with a 1-based line and column (columns count chars).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    /// Shifts the position of an error found in a substring that starts at
    /// (`line`, `column`) of some enclosing text.
    pub fn offset(mut self, line: usize, column: usize) -> Self {
        if self.line == 1 {
            self.column += column - 1;
        }
        self.line += line - 1;
        self
    }
}

pub fn parse_expr(text: &str) -> Result<BoolExpr, ParseError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
    };
    let e = p.parse_or()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error_here(format!("unexpected {:?}", p.chars[p.pos])));
    }
    Ok(e)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn location(&self, pos: usize) -> (usize, usize) {
        let mut line = 1;
        let mut column = 1;
        for &c in &self.chars[..pos.min(self.chars.len())] {
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        (line, column)
    }

    fn error_at(&self, pos: usize, message: String) -> ParseError {
        let (line, column) = self.location(pos);
        ParseError {
            line,
            column,
            message,
        }
    }

    fn error_here(&self, message: String) -> ParseError {
        self.error_at(self.pos, message)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn parse_or(&mut self) -> Result<BoolExpr, ParseError> {
        let mut lhs = self.parse_and()?;
        while self.peek() == Some('|') {
            self.pos += 1;
            let rhs = self.parse_and()?;
            lhs = BoolExpr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<BoolExpr, ParseError> {
        let mut lhs = self.parse_unary()?;
        while self.peek() == Some('&') {
            self.pos += 1;
            let rhs = self.parse_unary()?;
            lhs = BoolExpr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<BoolExpr, ParseError> {
        match self.peek() {
            Some('!') | Some('¬') => {
                self.pos += 1;
                Ok(BoolExpr::not(self.parse_unary()?))
            }
            _ => self.parse_primary(),
        }
    }

    fn parse_primary(&mut self) -> Result<BoolExpr, ParseError> {
        let start = self.pos;
        match self.peek() {
            None => Err(self.error_here("unexpected end of expression".into())),
            Some('(') => {
                let open = self.pos;
                self.pos += 1;
                let e = self.parse_or()?;
                if self.peek() != Some(')') {
                    return Err(self.error_at(open, "unbalanced '('".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            Some('{') => {
                let open = self.pos;
                self.pos += 1;
                let body_start = self.pos;
                loop {
                    match self.chars.get(self.pos) {
                        None => return Err(self.error_at(open, "unbalanced '{'".into())),
                        Some('{') => return Err(self.error_here("nested '{' inside atom".into())),
                        Some('}') => break,
                        Some(_) => self.pos += 1,
                    }
                }
                let inner: String = self.chars[body_start..self.pos].iter().collect();
                self.pos += 1;
                Atom::from_inner(&inner)
                    .map(BoolExpr::Atom)
                    .map_err(|e| self.error_at(open, e.to_string()))
            }
            Some('}') => Err(self.error_here("unbalanced '}'".into())),
            Some(')') => Err(self.error_here("unbalanced ')'".into())),
            Some(c) if c.is_alphabetic() => {
                let begin = self.pos;
                while self
                    .chars
                    .get(self.pos)
                    .is_some_and(|c| c.is_alphanumeric() || *c == '_')
                {
                    self.pos += 1;
                }
                let word: String = self.chars[begin..self.pos].iter().collect();
                match word.as_str() {
                    "true" => Ok(BoolExpr::True),
                    "false" => Ok(BoolExpr::False),
                    _ => Err(self.error_at(
                        start.max(begin),
                        format!("unknown word {word:?}; atoms are written {{Concept.State}}"),
                    )),
                }
            }
            Some(c) => Err(self.error_here(format!("unexpected {c:?}"))),
        }
    }
}
