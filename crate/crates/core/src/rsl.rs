//! Requirement specification language: boilerplates, the requirement state
//! machine, and the textual `.rsl` format.
//!
//! ```text
//! # comment to end of line
//! boilerplate B1 (trigger: state, sys: system, bad: state) pattern never;
//! requirement R1_3 stage 1 uses B1 {
//!     trigger = {System.normal system operation};
//!     sys = Feedwater Tank;
//!     bad = {Feedwater Tank.underflows};
//! }
//! requirement R1_4 stage 1 fsm {
//!     entry: {System.normal system operation};
//!     initial rs_0;                          # optional, defaults to first state
//!     state rs_0 { stay: !{Feedwater Tank.underflows}; }
//!     state rs_1 { stay: !{Feedwater Tank.underflows}; }
//!     trans rs_0 -> rs_1 when {Feedwater Tank.level low};
//!     trans rs_1 -> rs_0;                    # unguarded
//!     release rs_1: {Feedwater Tank.underflows};
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::expr::{parse_expr, Atom, BoolExpr, ParseError};
use crate::ontology::{Ontology, OntologyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    /// Bound to a concept vertex of the ontology.
    System,
    /// Bound to a formula over induced atoms.
    State,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    /// "When ⟨trigger⟩, then ⟨system⟩ never ⟨bad⟩."
    Never,
    /// "When ⟨trigger⟩, then ⟨system⟩ shall ⟨response⟩." Stay condition is
    /// the response; released once the trigger no longer holds.
    Response,
}

impl Pattern {
    fn keyword(self) -> &'static str {
        match self {
            Pattern::Never => "never",
            Pattern::Response => "response",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    pub kind: SlotKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Boilerplate {
    pub id: String,
    pub slots: Vec<Slot>,
    pub pattern: Pattern,
}

impl Boilerplate {
    fn new(id: &str, slots: &[(&str, SlotKind)], pattern: Pattern) -> Self {
        Boilerplate {
            id: id.into(),
            slots: slots
                .iter()
                .map(|(n, k)| Slot {
                    name: n.to_string(),
                    kind: *k,
                })
                .collect(),
            pattern,
        }
    }

    /// `When <trigger>, then <sys> never <bad>.`
    pub fn b1() -> Self {
        Boilerplate::new(
            "B1",
            &[
                ("trigger", SlotKind::State),
                ("sys", SlotKind::System),
                ("bad", SlotKind::State),
            ],
            Pattern::Never,
        )
    }

    /// `When <trigger>, then <sys> shall <response>.`
    pub fn b2() -> Self {
        Boilerplate::new(
            "B2",
            &[
                ("trigger", SlotKind::State),
                ("sys", SlotKind::System),
                ("response", SlotKind::State),
            ],
            Pattern::Response,
        )
    }

    /// Both patterns take exactly two state slots (trigger first) and one
    /// system slot.
    fn check_shape(&self) -> Result<(), InstantiateError> {
        let mut names = BTreeSet::new();
        for s in &self.slots {
            if !names.insert(&s.name) {
                return Err(InstantiateError::DuplicateSlot(s.name.clone()));
            }
        }
        let states = self
            .slots
            .iter()
            .filter(|s| s.kind == SlotKind::State)
            .count();
        let systems = self.slots.len() - states;
        if states != 2 || systems != 1 {
            return Err(InstantiateError::PatternShape {
                boilerplate: self.id.clone(),
                pattern: self.pattern.keyword(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotValue {
    Concept(String),
    Formula(BoolExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReqState {
    pub id: String,
    pub stay: Vec<BoolExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub source: String,
    pub guards: Vec<BoolExpr>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Release {
    pub state: String,
    pub condition: BoolExpr,
}

/// A requirement state machine. Formula sets are kept in declaration order;
/// wherever one formula is needed they are conjoined left to right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Requirement {
    pub id: String,
    pub stage: u32,
    pub states: Vec<ReqState>,
    pub initial: String,
    pub transitions: Vec<Transition>,
    pub entry: Vec<BoolExpr>,
    pub release: Vec<Release>,
}

impl Requirement {
    pub fn state(&self, id: &str) -> Option<&ReqState> {
        self.states.iter().find(|s| s.id == id)
    }

    pub fn stay_condition(&self, id: &str) -> BoolExpr {
        self.state(id)
            .map(|s| BoolExpr::conjoin(&s.stay))
            .unwrap_or(BoolExpr::True)
    }

    /// Every formula in the requirement, with a description of where it sits.
    pub fn formulas(&self) -> Vec<(String, &BoolExpr)> {
        let mut out = Vec::new();
        for (i, e) in self.entry.iter().enumerate() {
            out.push((format!("entry condition {}", i + 1), e));
        }
        for s in &self.states {
            for e in &s.stay {
                out.push((format!("stay condition of {}", s.id), e));
            }
        }
        for t in &self.transitions {
            for e in &t.guards {
                out.push((format!("guard of {} -> {}", t.source, t.target), e));
            }
        }
        for r in &self.release {
            out.push((format!("release condition of {}", r.state), &r.condition));
        }
        out
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.formulas()
            .into_iter()
            .flat_map(|(_, e)| e.atoms())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReqViolation {
    ZeroStage,
    StageBeyondOntology {
        stage: u32,
        ontology: u32,
    },
    NoStates,
    DuplicateState(String),
    UnknownInitial(String),
    UnknownTransitionEndpoint {
        source: String,
        target: String,
        missing: String,
    },
    UnknownReleaseState(String),
    NotAFunction {
        source: String,
        guards: String,
    },
    ForeignAtom {
        atom: Atom,
        location: String,
    },
    NoEntryCondition,
    NoReleaseCondition,
    InvalidOntology(String),
}

impl fmt::Display for ReqViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ReqViolation::*;
        match self {
            ZeroStage => write!(f, "stage must be positive"),
            StageBeyondOntology { stage, ontology } => write!(
                f,
                "requirement is written for stage {stage} but the ontology is at stage {ontology}"
            ),
            NoStates => write!(f, "requirement has no states"),
            DuplicateState(s) => write!(f, "state {s} declared twice"),
            UnknownInitial(s) => write!(f, "initial state {s} is not declared"),
            UnknownTransitionEndpoint {
                source,
                target,
                missing,
            } => write!(
                f,
                "transition {source} -> {target} uses undeclared state {missing}"
            ),
            UnknownReleaseState(s) => write!(f, "release condition on undeclared state {s}"),
            NotAFunction { source, guards } => write!(
                f,
                "transition function is not a function: two transitions leave {source} on guard set [{guards}]"
            ),
            ForeignAtom { atom, location } => {
                write!(f, "atom {atom} in {location} is not in the ontology")
            }
            NoEntryCondition => write!(f, "requirement has no entry condition"),
            NoReleaseCondition => write!(f, "requirement has no release condition"),
            InvalidOntology(e) => write!(f, "governing ontology is invalid: {e}"),
        }
    }
}

pub fn validate_requirement(r: &Requirement, o: &Ontology) -> Vec<ReqViolation> {
    let mut out = Vec::new();
    if r.stage == 0 {
        out.push(ReqViolation::ZeroStage);
    } else if r.stage > o.stage_version {
        out.push(ReqViolation::StageBeyondOntology {
            stage: r.stage,
            ontology: o.stage_version,
        });
    }

    let mut q = BTreeSet::new();
    for s in &r.states {
        if !q.insert(s.id.as_str()) {
            out.push(ReqViolation::DuplicateState(s.id.clone()));
        }
    }
    if q.is_empty() {
        out.push(ReqViolation::NoStates);
    }
    if !q.contains(r.initial.as_str()) {
        out.push(ReqViolation::UnknownInitial(r.initial.clone()));
    }

    let mut keys: BTreeSet<(&str, BTreeSet<&BoolExpr>)> = BTreeSet::new();
    for t in &r.transitions {
        for end in [&t.source, &t.target] {
            if !q.contains(end.as_str()) {
                out.push(ReqViolation::UnknownTransitionEndpoint {
                    source: t.source.clone(),
                    target: t.target.clone(),
                    missing: end.clone(),
                });
            }
        }
        let guard_set: BTreeSet<&BoolExpr> = t.guards.iter().collect();
        if !keys.insert((t.source.as_str(), guard_set)) {
            out.push(ReqViolation::NotAFunction {
                source: t.source.clone(),
                guards: t
                    .guards
                    .iter()
                    .map(|g| g.canonical())
                    .collect::<Vec<_>>()
                    .join(", "),
            });
        }
    }
    for rc in &r.release {
        if !q.contains(rc.state.as_str()) {
            out.push(ReqViolation::UnknownReleaseState(rc.state.clone()));
        }
    }
    if r.entry.is_empty() {
        out.push(ReqViolation::NoEntryCondition);
    }
    if r.release.is_empty() {
        out.push(ReqViolation::NoReleaseCondition);
    }

    match o.induced_atoms() {
        Ok(alphabet) => {
            for (location, e) in r.formulas() {
                for atom in e.atoms() {
                    if !alphabet.contains(&atom) {
                        out.push(ReqViolation::ForeignAtom {
                            atom,
                            location: location.clone(),
                        });
                    }
                }
            }
        }
        Err(e) => out.push(ReqViolation::InvalidOntology(e.to_string())),
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstantiateError {
    #[error("slot {0:?} is not bound")]
    UnboundSlot(String),
    #[error("binding for {0:?} names no slot of the boilerplate")]
    UnknownSlot(String),
    #[error("slot {0:?} declared twice")]
    DuplicateSlot(String),
    #[error("atom {0} is not in the ontology")]
    AtomNotInOntology(Atom),
    #[error("{0:?} is not a concept of the ontology")]
    NotAConcept(String),
    #[error("slot {slot:?} expects a {expected}")]
    KindMismatch {
        slot: String,
        expected: &'static str,
    },
    #[error("boilerplate {boilerplate} does not fit pattern {pattern}: expected two state slots and one system slot")]
    PatternShape {
        boilerplate: String,
        pattern: &'static str,
    },
    #[error("{0}")]
    Ontology(String),
}

/// Fills a boilerplate's slots and builds the single-state machine its
/// pattern prescribes.
pub fn instantiate_boilerplate(
    b: &Boilerplate,
    id: &str,
    stage: u32,
    bindings: &BTreeMap<String, SlotValue>,
    o: &Ontology,
) -> Result<Requirement, InstantiateError> {
    b.check_shape()?;
    for name in bindings.keys() {
        if !b.slots.iter().any(|s| &s.name == name) {
            return Err(InstantiateError::UnknownSlot(name.clone()));
        }
    }
    let alphabet = o
        .induced_atoms()
        .map_err(|e: OntologyError| InstantiateError::Ontology(e.to_string()))?;

    let mut formulas = Vec::new();
    for slot in &b.slots {
        let value = bindings
            .get(&slot.name)
            .ok_or_else(|| InstantiateError::UnboundSlot(slot.name.clone()))?;
        match (slot.kind, value) {
            (SlotKind::State, SlotValue::Formula(e)) => {
                if let Some(a) = e.atoms().into_iter().find(|a| !alphabet.contains(a)) {
                    return Err(InstantiateError::AtomNotInOntology(a));
                }
                formulas.push(e.clone());
            }
            (SlotKind::System, SlotValue::Concept(c)) => {
                if !o.is_concept(c) {
                    return Err(InstantiateError::NotAConcept(c.clone()));
                }
            }
            (SlotKind::State, SlotValue::Concept(_)) => {
                return Err(InstantiateError::KindMismatch {
                    slot: slot.name.clone(),
                    expected: "state formula such as {Concept.State}",
                })
            }
            (SlotKind::System, SlotValue::Formula(_)) => {
                return Err(InstantiateError::KindMismatch {
                    slot: slot.name.clone(),
                    expected: "concept name",
                })
            }
        }
    }
    let [trigger, second]: [BoolExpr; 2] = formulas.try_into().expect("shape checked");

    let (stay, release) = match b.pattern {
        Pattern::Never => (BoolExpr::not(second.clone()), second),
        Pattern::Response => (second, BoolExpr::not(trigger.clone())),
    };
    let q0 = "rs_0".to_string();
    Ok(Requirement {
        id: id.to_string(),
        stage,
        states: vec![ReqState {
            id: q0.clone(),
            stay: vec![stay],
        }],
        initial: q0.clone(),
        transitions: vec![],
        entry: vec![trigger],
        release: vec![Release {
            state: q0,
            condition: release,
        }],
    })
}

// ---------------------------------------------------------------------------
// Text format

/// Position in an `.rsl` file, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RslError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: unknown boilerplate {id}")]
    UnknownBoilerplate { pos: Pos, id: String },
    #[error("{pos}: boilerplate {id} declared twice")]
    DuplicateBoilerplate { pos: Pos, id: String },
    #[error("{pos}: requirement {requirement}: {error}")]
    Instantiate {
        pos: Pos,
        requirement: String,
        error: InstantiateError,
    },
    #[error("{pos}: requirement {requirement}: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid {
        pos: Pos,
        requirement: String,
        violations: Vec<ReqViolation>,
    },
}

impl RslError {
    /// Whether the error is about requirement content (as opposed to syntax).
    pub fn is_semantic(&self) -> bool {
        matches!(
            self,
            RslError::Instantiate { .. } | RslError::Invalid { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RequirementBody {
    Uses {
        boilerplate: String,
        boilerplate_pos: Pos,
        bindings: Vec<(String, SlotValue)>,
    },
    Fsm(Requirement),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequirementBlock {
    pub id: String,
    pub stage: u32,
    pub pos: Pos,
    pub body: RequirementBody,
}

/// A syntactically parsed `.rsl` file, not yet checked against an ontology.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RslDocument {
    pub boilerplates: Vec<(Boilerplate, Pos)>,
    pub requirements: Vec<RequirementBlock>,
}

impl RslDocument {
    pub fn parse(text: &str) -> Result<Self, RslError> {
        Scanner::new(text).document()
    }

    /// Boilerplates visible to requirements: B1 and B2, shadowed by any
    /// declaration in the file.
    pub fn boilerplate_table(&self) -> BTreeMap<String, Boilerplate> {
        let mut table: BTreeMap<String, Boilerplate> = [Boilerplate::b1(), Boilerplate::b2()]
            .into_iter()
            .map(|b| (b.id.clone(), b))
            .collect();
        for (b, _) in &self.boilerplates {
            table.insert(b.id.clone(), b.clone());
        }
        table
    }

    /// Elaborates and validates each block independently.
    pub fn elaborate(&self, o: &Ontology) -> Vec<Result<Requirement, RslError>> {
        let table = self.boilerplate_table();
        self.requirements
            .iter()
            .map(|block| {
                let r = match &block.body {
                    RequirementBody::Fsm(r) => r.clone(),
                    RequirementBody::Uses {
                        boilerplate,
                        boilerplate_pos,
                        bindings,
                    } => {
                        let b =
                            table
                                .get(boilerplate)
                                .ok_or_else(|| RslError::UnknownBoilerplate {
                                    pos: *boilerplate_pos,
                                    id: boilerplate.clone(),
                                })?;
                        let map: BTreeMap<String, SlotValue> = bindings.iter().cloned().collect();
                        instantiate_boilerplate(b, &block.id, block.stage, &map, o).map_err(
                            |error| RslError::Instantiate {
                                pos: block.pos,
                                requirement: block.id.clone(),
                                error,
                            },
                        )?
                    }
                };
                let violations = validate_requirement(&r, o);
                if violations.is_empty() {
                    Ok(r)
                } else {
                    Err(RslError::Invalid {
                        pos: block.pos,
                        requirement: block.id.clone(),
                        violations,
                    })
                }
            })
            .collect()
    }
}

/// Parses an `.rsl` file and checks every requirement against `o`.
pub fn parse_rsl(text: &str, o: &Ontology) -> Result<Vec<Requirement>, RslError> {
    RslDocument::parse(text)?.elaborate(o).into_iter().collect()
}

/// Renders requirements as explicit `fsm` blocks.
pub fn print_rsl(reqs: &[Requirement]) -> String {
    let list = |es: &[BoolExpr]| {
        es.iter()
            .map(|e| e.canonical())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut out = String::new();
    for (i, r) in reqs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "requirement {} stage {} fsm {{", r.id, r.stage);
        if !r.entry.is_empty() {
            let _ = writeln!(out, "    entry: {};", list(&r.entry));
        }
        let _ = writeln!(out, "    initial {};", r.initial);
        for s in &r.states {
            if s.stay.is_empty() {
                let _ = writeln!(out, "    state {} {{ }}", s.id);
            } else {
                let _ = writeln!(out, "    state {} {{ stay: {}; }}", s.id, list(&s.stay));
            }
        }
        for t in &r.transitions {
            if t.guards.is_empty() {
                let _ = writeln!(out, "    trans {} -> {};", t.source, t.target);
            } else {
                let _ = writeln!(
                    out,
                    "    trans {} -> {} when {};",
                    t.source,
                    t.target,
                    list(&t.guards)
                );
            }
        }
        for rc in &r.release {
            let _ = writeln!(
                out,
                "    release {}: {};",
                rc.state,
                rc.condition.canonical()
            );
        }
        out.push_str("}\n");
    }
    out
}

struct Scanner {
    chars: Vec<char>,
    positions: Vec<Pos>,
    pos: usize,
}

impl Scanner {
    fn new(text: &str) -> Self {
        // Blank out comments, keeping offsets; `#` inside an atom is literal.
        let mut chars: Vec<char> = text.chars().collect();
        let mut in_atom = false;
        let mut i = 0;
        while i < chars.len() {
            match chars[i] {
                '{' if !in_atom && i + 1 < chars.len() && !chars[i + 1].is_whitespace() => {
                    in_atom = true
                }
                '}' if in_atom => in_atom = false,
                '\n' => in_atom = false,
                '#' if !in_atom => {
                    while i < chars.len() && chars[i] != '\n' {
                        chars[i] = ' ';
                        i += 1;
                    }
                    continue;
                }
                _ => {}
            }
            i += 1;
        }
        let mut positions = Vec::with_capacity(chars.len() + 1);
        let (mut line, mut column) = (1, 1);
        for &c in &chars {
            positions.push(Pos { line, column });
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        positions.push(Pos { line, column });
        Scanner {
            chars,
            positions,
            pos: 0,
        }
    }

    fn here(&self) -> Pos {
        self.positions[self.pos.min(self.chars.len())]
    }

    fn mark(&mut self) -> Pos {
        self.skip_ws();
        self.here()
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, RslError> {
        Err(RslError::Syntax {
            pos: self.here(),
            message: message.into(),
        })
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

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), RslError> {
        if self.eat(c) {
            Ok(())
        } else {
            let found = self
                .peek()
                .map_or("end of file".to_string(), |f| format!("{f:?}"));
            self.err(format!("expected {c:?}, found {found}"))
        }
    }

    fn expect_arrow(&mut self) -> Result<(), RslError> {
        self.skip_ws();
        if self.chars.get(self.pos) == Some(&'-') && self.chars.get(self.pos + 1) == Some(&'>') {
            self.pos += 2;
            Ok(())
        } else {
            self.err("expected '->'")
        }
    }

    fn ident(&mut self) -> Result<String, RslError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .chars
            .get(self.pos)
            .is_some_and(|c| c.is_alphanumeric() || *c == '_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected an identifier");
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn keyword(&mut self, kw: &str) -> Result<(), RslError> {
        let at = self.mark();
        let word = self.ident().map_err(|_| RslError::Syntax {
            pos: at,
            message: format!("expected `{kw}`"),
        })?;
        if word == kw {
            Ok(())
        } else {
            Err(RslError::Syntax {
                pos: at,
                message: format!("expected `{kw}`, found `{word}`"),
            })
        }
    }

    fn number(&mut self) -> Result<u32, RslError> {
        let at = self.mark();
        let word = self.ident()?;
        word.parse().map_err(|_| RslError::Syntax {
            pos: at,
            message: format!("expected a stage number, found `{word}`"),
        })
    }

    /// Raw text up to (not including) the next `;` or, with `commas`, `,`
    /// outside braces and parentheses.
    fn raw(&mut self, commas: bool) -> Result<(String, Pos), RslError> {
        self.skip_ws();
        let start = self.pos;
        let mut depth = 0usize;
        let mut in_atom = false;
        while let Some(&c) = self.chars.get(self.pos) {
            match c {
                '{' => in_atom = true,
                '}' => in_atom = false,
                '(' if !in_atom => depth += 1,
                ')' if !in_atom => depth = depth.saturating_sub(1),
                ';' if !in_atom && depth == 0 => break,
                ',' if commas && !in_atom && depth == 0 => break,
                _ => {}
            }
            self.pos += 1;
        }
        if self.pos >= self.chars.len() {
            return Err(RslError::Syntax {
                pos: self.positions[start],
                message: "missing ';'".into(),
            });
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        Ok((text.trim_end().to_string(), self.positions[start]))
    }

    fn expr(&mut self, commas: bool) -> Result<BoolExpr, RslError> {
        let (text, at) = self.raw(commas)?;
        parse_expr(&text).map_err(|e: ParseError| {
            let e = e.offset(at.line, at.column);
            RslError::Syntax {
                pos: Pos {
                    line: e.line,
                    column: e.column,
                },
                message: e.message,
            }
        })
    }

    fn expr_list(&mut self) -> Result<Vec<BoolExpr>, RslError> {
        let mut out = vec![self.expr(true)?];
        while self.eat(',') {
            out.push(self.expr(true)?);
        }
        self.expect(';')?;
        Ok(out)
    }

    fn document(mut self) -> Result<RslDocument, RslError> {
        let mut doc = RslDocument::default();
        let mut declared = BTreeSet::new();
        while !self.at_end() {
            let at = self.mark();
            match self.ident()?.as_str() {
                "boilerplate" => {
                    let b = self.boilerplate()?;
                    if !declared.insert(b.id.clone()) {
                        return Err(RslError::DuplicateBoilerplate { pos: at, id: b.id });
                    }
                    doc.boilerplates.push((b, at));
                }
                "requirement" => doc.requirements.push(self.requirement(at)?),
                other => {
                    return Err(RslError::Syntax {
                        pos: at,
                        message: format!(
                            "expected `boilerplate` or `requirement`, found `{other}`"
                        ),
                    })
                }
            }
        }
        Ok(doc)
    }

    fn boilerplate(&mut self) -> Result<Boilerplate, RslError> {
        let id = self.ident()?;
        self.expect('(')?;
        let mut slots = Vec::new();
        loop {
            let name = self.ident()?;
            self.expect(':')?;
            let at = self.mark();
            let kind = match self.ident()?.as_str() {
                "state" => SlotKind::State,
                "system" => SlotKind::System,
                other => {
                    return Err(RslError::Syntax {
                        pos: at,
                        message: format!("slot kind must be `state` or `system`, found `{other}`"),
                    })
                }
            };
            slots.push(Slot { name, kind });
            if !self.eat(',') {
                break;
            }
        }
        self.expect(')')?;
        self.keyword("pattern")?;
        let at = self.mark();
        let pattern = match self.ident()?.as_str() {
            "never" => Pattern::Never,
            "response" => Pattern::Response,
            other => {
                return Err(RslError::Syntax {
                    pos: at,
                    message: format!("unknown pattern `{other}`"),
                })
            }
        };
        self.expect(';')?;
        Ok(Boilerplate { id, slots, pattern })
    }

    fn requirement(&mut self, pos: Pos) -> Result<RequirementBlock, RslError> {
        let id = self.ident()?;
        self.keyword("stage")?;
        let stage = self.number()?;
        let at = self.mark();
        let body = match self.ident()?.as_str() {
            "uses" => {
                let boilerplate_pos = self.mark();
                let boilerplate = self.ident()?;
                self.expect('{')?;
                let mut bindings = Vec::new();
                while !self.eat('}') {
                    let name = self.ident()?;
                    self.expect('=')?;
                    let value = self.slot_value()?;
                    self.expect(';')?;
                    bindings.push((name, value));
                }
                RequirementBody::Uses {
                    boilerplate,
                    boilerplate_pos,
                    bindings,
                }
            }
            "fsm" => RequirementBody::Fsm(self.fsm(&id, stage)?),
            other => {
                return Err(RslError::Syntax {
                    pos: at,
                    message: format!("expected `uses` or `fsm`, found `{other}`"),
                })
            }
        };
        Ok(RequirementBlock {
            id,
            stage,
            pos,
            body,
        })
    }

    fn slot_value(&mut self) -> Result<SlotValue, RslError> {
        let save = self.pos;
        let (text, at) = self.raw(false)?;
        let looks_like_name = !text.is_empty()
            && !text.contains(['{', '}', '(', ')', '!', '¬', '&', '|'])
            && text != "true"
            && text != "false";
        if looks_like_name {
            return Ok(SlotValue::Concept(text.trim().to_string()));
        }
        if text.is_empty() {
            return Err(RslError::Syntax {
                pos: at,
                message: "empty binding".into(),
            });
        }
        self.pos = save;
        self.expr(false).map(SlotValue::Formula)
    }

    fn fsm(&mut self, id: &str, stage: u32) -> Result<Requirement, RslError> {
        self.expect('{')?;
        let mut r = Requirement {
            id: id.to_string(),
            stage,
            states: vec![],
            initial: String::new(),
            transitions: vec![],
            entry: vec![],
            release: vec![],
        };
        let mut initial = None;
        while !self.eat('}') {
            if self.at_end() {
                return self.err("unterminated fsm block");
            }
            let at = self.mark();
            match self.ident()?.as_str() {
                "entry" => {
                    self.expect(':')?;
                    r.entry.extend(self.expr_list()?);
                }
                "initial" => {
                    initial = Some(self.ident()?);
                    self.expect(';')?;
                }
                "state" => {
                    let sid = self.ident()?;
                    self.expect('{')?;
                    let mut stay = Vec::new();
                    while !self.eat('}') {
                        self.keyword("stay")?;
                        self.expect(':')?;
                        stay.extend(self.expr_list()?);
                    }
                    r.states.push(ReqState { id: sid, stay });
                }
                "trans" => {
                    let source = self.ident()?;
                    self.expect_arrow()?;
                    let target = self.ident()?;
                    let guards = if self.eat(';') {
                        Vec::new()
                    } else {
                        self.keyword("when")?;
                        self.expr_list()?
                    };
                    r.transitions.push(Transition {
                        source,
                        guards,
                        target,
                    });
                }
                "release" => {
                    let state = self.ident()?;
                    self.expect(':')?;
                    let condition = self.expr(false)?;
                    self.expect(';')?;
                    r.release.push(Release { state, condition });
                }
                other => {
                    return Err(RslError::Syntax {
                        pos: at,
                        message: format!(
                            "expected `entry`, `initial`, `state`, `trans` or `release`, found `{other}`"
                        ),
                    })
                }
            }
        }
        r.initial = initial
            .or_else(|| r.states.first().map(|s| s.id.clone()))
            .unwrap_or_default();
        Ok(r)
    }
}
