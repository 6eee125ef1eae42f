//! Ontology-backed safety requirements, automatic test-case generation from
//! requirement state machines, and execution of those test cases against
//! traces of a feedwater-tank simulator.
//!
//! The pipeline runs stage by stage:
//!
//! 1. describe the system in an [`ontology::Ontology`], refining it as the
//!    design gets more concrete;
//! 2. write requirements over its atoms ([`rsl`]), either by filling a
//!    boilerplate or as an explicit state machine;
//! 3. unroll each requirement into test cases ([`testgen`]);
//! 4. run the test cases over traces ([`executor`]), e.g. traces produced by
//!    [`wps_sim`].

pub mod cli;
pub mod executor;
pub mod expr;
pub mod ontology;
pub mod rsl;
pub mod testgen;
pub mod wps_sim;

pub use executor::{execute, run_suite, SuiteReport, Trace, Verdict};
pub use expr::{parse_expr, Atom, BoolExpr};
pub use ontology::{Ontology, RefinementLink};
pub use rsl::{parse_rsl, print_rsl, Requirement};
pub use testgen::{generate, Bounds, TestCase, TestStep};
