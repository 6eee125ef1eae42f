//! Test execution over sampled traces, and the comma-delimited interchange
//! formats for test cases and traces.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expr, Atom, BoolExpr};
use crate::testgen::{TestCase, TestStep};

pub const TEST_CASE_HEADER: &str = "test_case_id,step_index,pre_condition,post_condition";
pub const ANALOG_PREFIX: &str = "num:";

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    /// Indexed like [`Trace::atoms`].
    pub values: Vec<bool>,
    /// Indexed like [`Trace::analog_names`].
    pub analogs: Vec<f64>,
}

/// Time-indexed valuations of a fixed atom set, plus analog signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    atoms: Vec<Atom>,
    analog_names: Vec<String>,
    samples: Vec<Sample>,
    index: HashMap<Atom, usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("duplicate column {0}")]
    DuplicateColumn(String),
    #[error("time {time} at sample {sample} does not increase on the previous sample")]
    NonMonotoneTime { sample: usize, time: f64 },
    #[error("sample {sample} has {got} {what} values, expected {expected}")]
    Arity {
        sample: usize,
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
}

impl Trace {
    pub fn new(atoms: Vec<Atom>, analog_names: Vec<String>) -> Result<Self, TraceError> {
        let mut index = HashMap::new();
        for (i, a) in atoms.iter().enumerate() {
            if index.insert(a.clone(), i).is_some() {
                return Err(TraceError::DuplicateColumn(a.to_string()));
            }
        }
        let mut seen = BTreeSet::new();
        for n in &analog_names {
            if !seen.insert(n) {
                return Err(TraceError::DuplicateColumn(n.clone()));
            }
        }
        Ok(Trace {
            atoms,
            analog_names,
            samples: Vec::new(),
            index,
        })
    }

    pub fn push(
        &mut self,
        time: f64,
        values: Vec<bool>,
        analogs: Vec<f64>,
    ) -> Result<(), TraceError> {
        let sample = self.samples.len();
        if values.len() != self.atoms.len() {
            return Err(TraceError::Arity {
                sample,
                what: "atom",
                got: values.len(),
                expected: self.atoms.len(),
            });
        }
        if analogs.len() != self.analog_names.len() {
            return Err(TraceError::Arity {
                sample,
                what: "analog",
                got: analogs.len(),
                expected: self.analog_names.len(),
            });
        }
        if !time.is_finite() || self.samples.last().is_some_and(|s| s.time >= time) {
            return Err(TraceError::NonMonotoneTime { sample, time });
        }
        self.samples.push(Sample {
            time,
            values,
            analogs,
        });
        Ok(())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn analog_names(&self) -> &[String] {
        &self.analog_names
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_atom(&self, a: &Atom) -> bool {
        self.index.contains_key(a)
    }

    pub fn value(&self, sample: usize, a: &Atom) -> Option<bool> {
        self.index.get(a).map(|&i| self.samples[sample].values[i])
    }

    pub fn analog(&self, sample: usize, name: &str) -> Option<f64> {
        let i = self.analog_names.iter().position(|n| n == name)?;
        Some(self.samples[sample].analogs[i])
    }

    pub fn valuation(&self, sample: usize) -> BTreeMap<Atom, bool> {
        self.atoms
            .iter()
            .cloned()
            .zip(self.samples[sample].values.iter().copied())
            .collect()
    }

    fn holds(&self, e: &BoolExpr, sample: usize) -> bool {
        let values = &self.samples[sample].values;
        e.eval_with(&mut |a| self.index.get(a).map(|&i| values[i]))
            .expect("atom domain checked before execution")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// No step was violated. `released` tells whether the final (release)
    /// step was reached.
    Pass {
        released: bool,
    },
    /// `step` is 1-based; `time` is the sample time of the violation.
    Fail {
        step: usize,
        time: f64,
        violated: BoolExpr,
    },
    NotTriggered,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass { released: true } => write!(f, "PASS (released)"),
            Verdict::Pass { released: false } => write!(f, "PASS (not released)"),
            Verdict::Fail {
                step,
                time,
                violated,
            } => write!(f, "FAIL at step {step}, t={time}: {violated} violated"),
            Verdict::NotTriggered => write!(f, "NOT TRIGGERED"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("test case {test_case} uses atom {atom}, which the trace does not record")]
    AtomDomain { test_case: String, atom: Atom },
    #[error(transparent)]
    Shape(#[from] crate::testgen::TestCaseError),
}

/// Runs one test case over a trace in a single forward scan.
///
/// Step 1 arms on the first sample where its pre-condition holds. On every
/// sample from then on, with step `i` active: if step `i+1`'s pre-condition
/// holds the case advances (at most one step per sample), and reaching the
/// final step passes immediately; otherwise, and also right after an
/// advance, the active step's post-condition must hold or the case fails.
pub fn execute(tc: &TestCase, trace: &Trace) -> Result<Verdict, ExecError> {
    tc.check_shape()?;
    if let Some(atom) = tc.atoms().into_iter().find(|a| !trace.has_atom(a)) {
        return Err(ExecError::AtomDomain {
            test_case: tc.id.clone(),
            atom,
        });
    }
    let steps = &tc.steps;
    let last = steps.len() - 1;
    let Some(armed) = (0..trace.len()).find(|&k| trace.holds(&steps[0].pre, k)) else {
        return Ok(Verdict::NotTriggered);
    };
    if last == 0 {
        return Ok(Verdict::Pass { released: true });
    }

    let mut active = 0;
    for k in armed..trace.len() {
        if trace.holds(&steps[active + 1].pre, k) {
            active += 1;
            if active == last {
                return Ok(Verdict::Pass { released: true });
            }
        }
        let post = steps[active]
            .post
            .as_ref()
            .expect("only the last step is null");
        if !trace.holds(post, k) {
            return Ok(Verdict::Fail {
                step: active + 1,
                time: trace.samples[k].time,
                violated: post.clone(),
            });
        }
    }
    Ok(Verdict::Pass { released: false })
}

// ---------------------------------------------------------------------------
// Test-case CSV

fn quote(field: &str) -> String {
    format!("\"{}\"", field.replace('"', "\"\""))
}

fn quote_if_needed(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        quote(field)
    } else {
        field.to_string()
    }
}

fn condition_cell(e: &BoolExpr) -> String {
    quote(&format!("({})", e.canonical()))
}

/// Renders test cases as `test_case_id,step_index,pre_condition,post_condition`
/// rows. Conditions are wrapped in one pair of parentheses and always
/// double-quoted; a NULL post-condition is the bare word `null`.
pub fn export_csv(tcs: &[TestCase]) -> String {
    let mut out = String::from(TEST_CASE_HEADER);
    out.push('\n');
    for tc in tcs {
        for (i, s) in tc.steps.iter().enumerate() {
            out.push_str(&quote_if_needed(&tc.id));
            out.push(',');
            out.push_str(&(i + 1).to_string());
            out.push(',');
            out.push_str(&condition_cell(&s.pre));
            out.push(',');
            match &s.post {
                Some(p) => out.push_str(&condition_cell(p)),
                None => out.push_str("null"),
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CsvError {
    #[error("line {line}: expected header `{expected}`")]
    Header { line: u64, expected: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    Columns {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    Cell { line: u64, message: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
}

fn record_line(r: &csv::StringRecord) -> u64 {
    r.position().map_or(0, |p| p.line())
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes())
}

pub fn import_csv(text: &str) -> Result<Vec<TestCase>, CsvError> {
    let mut rdr = reader(text);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        _ => {
            return Err(CsvError::Header {
                line: 1,
                expected: TEST_CASE_HEADER.into(),
            })
        }
    };
    if header.iter().collect::<Vec<_>>().join(",") != TEST_CASE_HEADER {
        return Err(CsvError::Header {
            line: 1,
            expected: TEST_CASE_HEADER.into(),
        });
    }

    let mut out: Vec<TestCase> = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| CsvError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record_line(&rec);
        if rec.len() != 4 {
            return Err(CsvError::Columns {
                line,
                expected: 4,
                found: rec.len(),
            });
        }
        let cell_err = |message: String| CsvError::Cell { line, message };
        let id = rec[0].to_string();
        let index: usize = rec[1]
            .parse()
            .map_err(|_| cell_err(format!("bad step index {:?}", &rec[1])))?;
        let pre = parse_expr(&rec[2]).map_err(|e| cell_err(format!("pre_condition: {e}")))?;
        let post = match &rec[3] {
            "null" => None,
            s => Some(parse_expr(s).map_err(|e| cell_err(format!("post_condition: {e}")))?),
        };
        let step = TestStep { pre, post };
        match out.last_mut() {
            Some(tc) if tc.id == id => {
                if index != tc.steps.len() + 1 {
                    return Err(cell_err(format!(
                        "step index {index} out of sequence for {id}"
                    )));
                }
                tc.steps.push(step);
            }
            _ => {
                if index != 1 {
                    return Err(cell_err(format!("test case {id} must start at step 1")));
                }
                if out.iter().any(|tc| tc.id == id) {
                    return Err(cell_err(format!(
                        "rows of test case {id} are not contiguous"
                    )));
                }
                out.push(TestCase {
                    id,
                    steps: vec![step],
                });
            }
        }
    }
    for tc in &out {
        tc.check_shape().map_err(|e| CsvError::Cell {
            line: 0,
            message: e.to_string(),
        })?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Trace CSV

/// Header `time`, then one column per atom (`{Concept.State}`), then analog
/// columns prefixed `num:`. Atom cells are `0`/`1`; numbers use the shortest
/// representation that reads back exactly.
pub fn save_trace_csv(trace: &Trace) -> String {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["time".to_string()];
    header.extend(trace.atoms.iter().map(|a| a.to_string()));
    header.extend(
        trace
            .analog_names
            .iter()
            .map(|n| format!("{ANALOG_PREFIX}{n}")),
    );
    wtr.write_record(&header).expect("in-memory write");
    for s in &trace.samples {
        let mut row = vec![s.time.to_string()];
        row.extend(
            s.values
                .iter()
                .map(|&v| if v { "1" } else { "0" }.to_string()),
        );
        row.extend(s.analogs.iter().map(|x| x.to_string()));
        wtr.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn load_trace_csv(text: &str) -> Result<Trace, TraceError> {
    let mut rdr = reader(text);
    let mut records = rdr.records();
    let csv_err = |e: csv::Error| TraceError::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let header = records
        .next()
        .ok_or(TraceError::Csv {
            line: 1,
            message: "empty trace file".into(),
        })?
        .map_err(csv_err)?;
    if header.get(0) != Some("time") {
        return Err(TraceError::Csv {
            line: 1,
            message: "first column must be `time`".into(),
        });
    }
    let mut atoms = Vec::new();
    let mut analogs = Vec::new();
    for col in header.iter().skip(1) {
        if let Some(name) = col.strip_prefix(ANALOG_PREFIX) {
            analogs.push(name.to_string());
        } else {
            if !analogs.is_empty() {
                return Err(TraceError::Csv {
                    line: 1,
                    message: format!("atom column {col} after analog columns"),
                });
            }
            match parse_expr(col) {
                Ok(BoolExpr::Atom(a)) => atoms.push(a),
                _ => {
                    return Err(TraceError::Csv {
                        line: 1,
                        message: format!("column {col:?} is neither an atom nor `num:`-prefixed"),
                    })
                }
            }
        }
    }
    let width = 1 + atoms.len() + analogs.len();
    let n_atoms = atoms.len();
    let mut trace = Trace::new(atoms, analogs)?;
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = record_line(&rec);
        if rec.len() != width {
            return Err(TraceError::Csv {
                line,
                message: format!("expected {width} columns, found {}", rec.len()),
            });
        }
        let bad = |message: String| TraceError::Csv { line, message };
        let time: f64 = rec[0]
            .parse()
            .map_err(|_| bad(format!("bad time {:?}", &rec[0])))?;
        let mut values = Vec::with_capacity(n_atoms);
        for cell in rec.iter().skip(1).take(n_atoms) {
            values.push(match cell {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("atom cell {other:?} is not 0 or 1"))),
            });
        }
        let mut nums = Vec::with_capacity(width - 1 - n_atoms);
        for cell in rec.iter().skip(1 + n_atoms) {
            nums.push(
                cell.parse()
                    .map_err(|_| bad(format!("bad number {cell:?}")))?,
            );
        }
        trace.push(time, values, nums).map_err(|e| match e {
            TraceError::NonMonotoneTime { .. } => bad(e.to_string()),
            other => other,
        })?;
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Suites

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCell {
    pub test_case: String,
    pub trace: String,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOutcome {
    Verdict(Verdict),
    Error(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteCounts {
    pub pass: usize,
    pub fail: usize,
    pub not_triggered: usize,
    pub error: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub test_cases: Vec<String>,
    pub traces: Vec<String>,
    /// Row-major: test cases in input order, traces in name order.
    pub cells: Vec<SuiteCell>,
    pub counts: SuiteCounts,
}

impl SuiteReport {
    pub fn cell(&self, test_case: &str, trace: &str) -> Option<&SuiteCell> {
        self.cells
            .iter()
            .find(|c| c.test_case == test_case && c.trace == trace)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let width = self.test_cases.iter().map(|s| s.len()).max().unwrap_or(0);
        for c in &self.cells {
            let outcome = match &c.outcome {
                CellOutcome::Verdict(v) => v.to_string(),
                CellOutcome::Error(e) => format!("ERROR: {e}"),
            };
            out.push_str(&format!(
                "{:width$}  {}  {}\n",
                c.test_case, c.trace, outcome
            ));
        }
        let k = &self.counts;
        out.push_str(&format!(
            "pass {} / fail {} / not triggered {} / error {}\n",
            k.pass, k.fail, k.not_triggered, k.error
        ));
        out
    }
}

pub fn run_suite(tcs: &[TestCase], traces: &BTreeMap<String, Trace>) -> SuiteReport {
    let mut counts = SuiteCounts::default();
    let mut cells = Vec::with_capacity(tcs.len() * traces.len());
    for tc in tcs {
        for (name, trace) in traces {
            let outcome = match execute(tc, trace) {
                Ok(v) => {
                    match v {
                        Verdict::Pass { .. } => counts.pass += 1,
                        Verdict::Fail { .. } => counts.fail += 1,
                        Verdict::NotTriggered => counts.not_triggered += 1,
                    }
                    CellOutcome::Verdict(v)
                }
                Err(e) => {
                    counts.error += 1;
                    CellOutcome::Error(e.to_string())
                }
            };
            cells.push(SuiteCell {
                test_case: tc.id.clone(),
                trace: name.clone(),
                outcome,
            });
        }
    }
    SuiteReport {
        test_cases: tcs.iter().map(|t| t.id.clone()).collect(),
        traces: traces.keys().cloned().collect(),
        cells,
        counts,
    }
}
