//! Labeled multigraph ontology: concepts, their states, and the links that
//! connect ontologies from successive development stages.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Atom;

pub const CONTAINS: &str = "contains";
pub const HAS_STATE: &str = "has-state";
pub const REFINES: &str = "refines";
pub const CONCEPT: &str = "concept";
pub const STATE: &str = "state";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: String,
    pub labels: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub id: String,
    pub source: String,
    pub target: String,
    pub labels: BTreeSet<String>,
}

/// `vertices` and `arcs` are kept sorted by id by every constructor in this
/// module; fields are public so that tests and tools can build malformed
/// graphs for [`Ontology::validate`] to reject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ontology {
    pub vertex_labels: BTreeSet<String>,
    pub arc_labels: BTreeSet<String>,
    pub stage_version: u32,
    pub vertices: Vec<Vertex>,
    pub arcs: Vec<Arc>,
}

/// Link from a vertex of a newer stage to the vertex of the older stage it
/// refines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementLink {
    pub refined: String,
    pub base: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    LabelOverlap { label: String },
    ZeroStage,
    DuplicateVertex { id: String },
    DuplicateArc { id: String },
    DanglingSource { arc: String, source: String },
    DanglingTarget { arc: String, target: String },
    UnknownVertexLabel { vertex: String, label: String },
    UnknownArcLabel { arc: String, label: String },
    HasStateSourceNotConcept { arc: String, source: String },
    HasStateTargetNotState { arc: String, target: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LabelOverlap { label } => write!(
                f,
                "label {label:?} is in both the vertex and the arc label alphabets"
            ),
            Violation::ZeroStage => write!(f, "stage_version must be positive"),
            Violation::DuplicateVertex { id } => write!(f, "duplicate vertex id {id:?}"),
            Violation::DuplicateArc { id } => write!(f, "duplicate arc id {id:?}"),
            Violation::DanglingSource { arc, source } => {
                write!(f, "arc {arc:?} has unknown source vertex {source:?}")
            }
            Violation::DanglingTarget { arc, target } => {
                write!(f, "arc {arc:?} has unknown target vertex {target:?}")
            }
            Violation::UnknownVertexLabel { vertex, label } => write!(
                f,
                "vertex {vertex:?} carries label {label:?} outside the vertex alphabet"
            ),
            Violation::UnknownArcLabel { arc, label } => write!(
                f,
                "arc {arc:?} carries label {label:?} outside the arc alphabet"
            ),
            Violation::HasStateSourceNotConcept { arc, source } => write!(
                f,
                "has-state arc {arc:?} starts at {source:?}, which is not labeled `concept`"
            ),
            Violation::HasStateTargetNotState { arc, target } => write!(
                f,
                "has-state arc {arc:?} ends at {target:?}, which is not labeled `state`"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("ontology is invalid: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("id {0:?} exists in both the base and the extension")]
    IdCollision(String),
    #[error("refinement link endpoint {which} vertex {id:?} does not exist")]
    DanglingLink { which: &'static str, id: String },
    #[error("atom {0} names concept {1:?}, which is not a vertex of the ontology")]
    UnknownConcept(Atom, String),
    #[error("has-state arc {0:?} joins names that are not valid atom names: {1}")]
    BadAtomName(String, crate::expr::AtomError),
    #[error("ontology document: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("ontology document has duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn labels<const N: usize>(ls: [&str; N]) -> BTreeSet<String> {
    ls.iter().map(|s| s.to_string()).collect()
}

impl Default for Ontology {
    fn default() -> Self {
        Ontology::new(1)
    }
}

impl Ontology {
    /// Empty ontology with the reserved labels already in its alphabets.
    pub fn new(stage_version: u32) -> Self {
        Ontology {
            vertex_labels: labels([CONCEPT, STATE]),
            arc_labels: labels([CONTAINS, HAS_STATE]),
            stage_version,
            vertices: Vec::new(),
            arcs: Vec::new(),
        }
    }

    pub fn vertex(&self, id: &str) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    pub fn arc(&self, id: &str) -> Option<&Arc> {
        self.arcs.iter().find(|a| a.id == id)
    }

    pub fn is_concept(&self, id: &str) -> bool {
        self.vertex(id).is_some_and(|v| v.labels.contains(CONCEPT))
    }

    /// Inserts (or replaces) a vertex, adding its labels to Σ_V.
    pub fn add_vertex<I, S>(&mut self, id: &str, labels: I) -> &mut Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        self.vertex_labels.extend(labels.iter().cloned());
        let v = Vertex {
            id: id.to_string(),
            labels,
        };
        match self.vertices.binary_search_by(|x| x.id.cmp(&v.id)) {
            Ok(i) => self.vertices[i] = v,
            Err(i) => self.vertices.insert(i, v),
        }
        self
    }

    /// Inserts (or replaces) an arc, adding its labels to Σ_A.
    pub fn add_arc<I, S>(&mut self, id: &str, source: &str, target: &str, labels: I) -> &mut Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        self.arc_labels.extend(labels.iter().cloned());
        let a = Arc {
            id: id.to_string(),
            source: source.to_string(),
            target: target.to_string(),
            labels,
        };
        match self.arcs.binary_search_by(|x| x.id.cmp(&a.id)) {
            Ok(i) => self.arcs[i] = a,
            Err(i) => self.arcs.insert(i, a),
        }
        self
    }

    pub fn add_concept(&mut self, id: &str) -> &mut Self {
        self.add_vertex(id, [CONCEPT])
    }

    pub fn add_state_vertex(&mut self, id: &str) -> &mut Self {
        self.add_vertex(id, [STATE])
    }

    /// Adds a state vertex (if new) and a has-state arc `concept -> state`
    /// with the arc id `<concept>/<state>`.
    pub fn attach_state(&mut self, concept: &str, state: &str) -> &mut Self {
        if self.vertex(state).is_none() {
            self.add_state_vertex(state);
        }
        let id = format!("{concept}/{state}");
        self.add_arc(&id, concept, state, [HAS_STATE])
    }

    pub fn contains(&mut self, parent: &str, child: &str) -> &mut Self {
        let id = format!("{parent}>{child}");
        self.add_arc(&id, parent, child, [CONTAINS])
    }

    /// Restores sorted order after direct field edits.
    pub fn normalize(&mut self) {
        self.vertices.sort_by(|a, b| a.id.cmp(&b.id));
        self.arcs.sort_by(|a, b| a.id.cmp(&b.id));
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.stage_version == 0 {
            out.push(Violation::ZeroStage);
        }
        for l in self.vertex_labels.intersection(&self.arc_labels) {
            out.push(Violation::LabelOverlap { label: l.clone() });
        }

        let mut by_id: BTreeMap<&str, &Vertex> = BTreeMap::new();
        for v in &self.vertices {
            if by_id.insert(&v.id, v).is_some() {
                out.push(Violation::DuplicateVertex { id: v.id.clone() });
            }
            for l in &v.labels {
                if !self.vertex_labels.contains(l) {
                    out.push(Violation::UnknownVertexLabel {
                        vertex: v.id.clone(),
                        label: l.clone(),
                    });
                }
            }
        }

        let mut arc_ids = BTreeSet::new();
        for a in &self.arcs {
            if !arc_ids.insert(&a.id) {
                out.push(Violation::DuplicateArc { id: a.id.clone() });
            }
            for l in &a.labels {
                if !self.arc_labels.contains(l) {
                    out.push(Violation::UnknownArcLabel {
                        arc: a.id.clone(),
                        label: l.clone(),
                    });
                }
            }
            let src = by_id.get(a.source.as_str());
            let tgt = by_id.get(a.target.as_str());
            if src.is_none() {
                out.push(Violation::DanglingSource {
                    arc: a.id.clone(),
                    source: a.source.clone(),
                });
            }
            if tgt.is_none() {
                out.push(Violation::DanglingTarget {
                    arc: a.id.clone(),
                    target: a.target.clone(),
                });
            }
            if a.labels.contains(HAS_STATE) {
                if src.is_some_and(|v| !v.labels.contains(CONCEPT)) {
                    out.push(Violation::HasStateSourceNotConcept {
                        arc: a.id.clone(),
                        source: a.source.clone(),
                    });
                }
                if tgt.is_some_and(|v| !v.labels.contains(STATE)) {
                    out.push(Violation::HasStateTargetNotState {
                        arc: a.id.clone(),
                        target: a.target.clone(),
                    });
                }
            }
        }
        out
    }

    fn require_valid(&self) -> Result<(), OntologyError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(OntologyError::Invalid(v))
        }
    }

    /// The atom alphabet: one `Concept.State` per has-state arc.
    pub fn induced_atoms(&self) -> Result<BTreeSet<Atom>, OntologyError> {
        self.require_valid()?;
        self.arcs
            .iter()
            .filter(|a| a.labels.contains(HAS_STATE))
            .map(|a| {
                Atom::new(&a.source, &a.target)
                    .map_err(|e| OntologyError::BadAtomName(a.id.clone(), e))
            })
            .collect()
    }

    /// Merges `extension` into `base` as the next stage, adding one `refines`
    /// arc (id `refines:<refined>-><base>`) per link.
    pub fn refine(
        base: &Ontology,
        extension: &Ontology,
        links: &[RefinementLink],
    ) -> Result<Ontology, OntologyError> {
        base.require_valid()?;
        extension.require_valid()?;
        for v in &extension.vertices {
            if base.vertex(&v.id).is_some() {
                return Err(OntologyError::IdCollision(v.id.clone()));
            }
        }
        for a in &extension.arcs {
            if base.arc(&a.id).is_some() {
                return Err(OntologyError::IdCollision(a.id.clone()));
            }
        }

        let mut merged = base.clone();
        merged.stage_version = base.stage_version + 1;
        merged
            .vertex_labels
            .extend(extension.vertex_labels.iter().cloned());
        merged
            .arc_labels
            .extend(extension.arc_labels.iter().cloned());
        merged.vertices.extend(extension.vertices.iter().cloned());
        merged.arcs.extend(extension.arcs.iter().cloned());
        merged.normalize();

        for link in links {
            if extension.vertex(&link.refined).is_none() {
                return Err(OntologyError::DanglingLink {
                    which: "refined",
                    id: link.refined.clone(),
                });
            }
            if base.vertex(&link.base).is_none() {
                return Err(OntologyError::DanglingLink {
                    which: "base",
                    id: link.base.clone(),
                });
            }
            let id = format!("{REFINES}:{}->{}", link.refined, link.base);
            if merged.arc(&id).is_some() {
                return Err(OntologyError::IdCollision(id));
            }
            merged.add_arc(&id, &link.refined, &link.base, [REFINES]);
        }
        merged.require_valid()?;
        Ok(merged)
    }

    /// Concepts used by `atoms` that have no `refines` arc in either
    /// direction. Always empty at stage 1.
    pub fn check_traceability(&self, atoms: &BTreeSet<Atom>) -> Result<Vec<String>, OntologyError> {
        self.require_valid()?;
        let concepts: BTreeSet<&str> = atoms.iter().map(|a| a.concept()).collect();
        for a in atoms {
            if self.vertex(a.concept()).is_none() {
                return Err(OntologyError::UnknownConcept(
                    a.clone(),
                    a.concept().to_string(),
                ));
            }
        }
        if self.stage_version <= 1 {
            return Ok(Vec::new());
        }
        let traced: BTreeSet<&str> = self
            .arcs
            .iter()
            .filter(|a| a.labels.contains(REFINES))
            .flat_map(|a| [a.source.as_str(), a.target.as_str()])
            .collect();
        Ok(concepts
            .into_iter()
            .filter(|c| !traced.contains(c))
            .map(str::to_string)
            .collect())
    }

    /// Copy with every vertex and arc id prefixed by `stage<n>:`, for stages
    /// whose ids would otherwise collide with an earlier stage.
    pub fn namespaced(&self, stage: u32) -> Ontology {
        let p = |id: &str| format!("stage{stage}:{id}");
        let mut o = self.clone();
        for v in &mut o.vertices {
            v.id = p(&v.id);
        }
        for a in &mut o.arcs {
            a.id = p(&a.id);
            a.source = p(&a.source);
            a.target = p(&a.target);
        }
        o.normalize();
        o
    }
}

/// Reads an `.onto.json` document.
pub fn load_ontology(text: &str) -> Result<Ontology, OntologyError> {
    let mut o: Ontology = serde_json::from_str(text)?;
    let mut seen = BTreeSet::new();
    for v in &o.vertices {
        if !seen.insert(&v.id) {
            return Err(OntologyError::DuplicateId {
                kind: "vertex",
                id: v.id.clone(),
            });
        }
    }
    let mut seen = BTreeSet::new();
    for a in &o.arcs {
        if !seen.insert(&a.id) {
            return Err(OntologyError::DuplicateId {
                kind: "arc",
                id: a.id.clone(),
            });
        }
    }
    o.normalize();
    Ok(o)
}

/// Writes an `.onto.json` document with every array sorted by id.
pub fn save_ontology(o: &Ontology) -> String {
    let mut sorted = o.clone();
    sorted.normalize();
    let mut s = serde_json::to_string_pretty(&sorted).expect("ontology serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wps_sim::minimal_ontology;

    fn atom(c: &str, s: &str) -> Atom {
        Atom::new(c, s).unwrap()
    }

    #[test]
    fn minimal_ontology_is_valid() {
        assert_eq!(minimal_ontology().validate(), vec![]);
    }

    #[test]
    fn overlapping_alphabets() {
        let mut o = minimal_ontology();
        o.vertex_labels.insert("x".into());
        o.arc_labels.insert("x".into());
        assert_eq!(
            o.validate(),
            vec![Violation::LabelOverlap { label: "x".into() }]
        );
    }

    #[test]
    fn dangling_arc_target() {
        let mut o = minimal_ontology();
        o.add_arc("bad", "System", "Nowhere", [CONTAINS]);
        let v = o.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("\"bad\""));
    }

    #[test]
    fn induced_atoms_of_minimal_ontology() {
        let atoms = minimal_ontology().induced_atoms().unwrap();
        assert!(atoms.contains(&atom("Feedwater Tank", "underflows")));
        assert!(atoms.contains(&atom("Feedwater Tank", "overflows")));
        assert!(atoms.contains(&atom("System", "normal system operation")));
    }

    #[test]
    fn induced_atoms_empty_and_shared_state() {
        let mut o = Ontology::new(1);
        o.add_concept("A");
        assert!(o.induced_atoms().unwrap().is_empty());

        // Hand enumeration: arcs A/on and B/on share the `on` vertex.
        o.add_concept("B")
            .attach_state("A", "on")
            .attach_state("B", "on");
        let atoms: Vec<_> = o.induced_atoms().unwrap().into_iter().collect();
        assert_eq!(atoms, vec![atom("A", "on"), atom("B", "on")]);
    }

    #[test]
    fn induced_atoms_requires_valid() {
        let mut o = minimal_ontology();
        o.add_arc("x", "System", "ghost", [HAS_STATE]);
        assert!(matches!(o.induced_atoms(), Err(OntologyError::Invalid(_))));
    }

    fn mvc() -> Ontology {
        let mut o = Ontology::new(1);
        o.add_concept("Plant")
            .add_concept("Controller")
            .add_concept("View");
        o
    }

    #[test]
    fn refine_with_mvc_design() {
        let base = minimal_ontology();
        let links = [RefinementLink {
            refined: "Plant".into(),
            base: "System".into(),
        }];
        let merged = Ontology::refine(&base, &mvc(), &links).unwrap();
        assert_eq!(merged.stage_version, 2);
        assert!(merged.arc_labels.contains(REFINES));
        let r = merged.arc("refines:Plant->System").unwrap();
        assert_eq!((r.source.as_str(), r.target.as_str()), ("Plant", "System"));
        assert_eq!(merged.validate(), vec![]);
    }

    #[test]
    fn refine_identity_and_errors() {
        let base = minimal_ontology();
        let empty = Ontology {
            vertex_labels: BTreeSet::new(),
            arc_labels: BTreeSet::new(),
            stage_version: 1,
            vertices: vec![],
            arcs: vec![],
        };
        let merged = Ontology::refine(&base, &empty, &[]).unwrap();
        let mut expected = base.clone();
        expected.stage_version = 2;
        assert_eq!(merged, expected);

        let bad = [RefinementLink {
            refined: "Plant".into(),
            base: "Nope".into(),
        }];
        assert!(matches!(
            Ontology::refine(&base, &mvc(), &bad),
            Err(OntologyError::DanglingLink { which: "base", .. })
        ));
        assert!(matches!(
            Ontology::refine(&base, &base, &[]),
            Err(OntologyError::IdCollision(_))
        ));
        // Namespacing lifts the collision.
        assert!(Ontology::refine(&base, &base.namespaced(2), &[]).is_ok());
    }

    #[test]
    fn traceability() {
        let base = minimal_ontology();
        let atoms: BTreeSet<Atom> = [
            atom("Feedwater Tank", "underflows"),
            atom("System", "normal system operation"),
        ]
        .into();
        assert!(base.check_traceability(&atoms).unwrap().is_empty());

        // The 6-vertex merged graph: the minimal concepts plus Plant/Controller/View
        // (states omitted), with Plant refining System only.
        let mut small = Ontology::new(1);
        small
            .add_concept("System")
            .add_concept("Feedwater Tank")
            .add_concept("FeedWater Alarm")
            .contains("System", "Feedwater Tank")
            .contains("System", "FeedWater Alarm");
        let links = [RefinementLink {
            refined: "Plant".into(),
            base: "System".into(),
        }];
        let merged = Ontology::refine(&small, &mvc(), &links).unwrap();
        assert_eq!(merged.vertices.len(), 6);
        assert_eq!(
            merged.check_traceability(&atoms).unwrap(),
            vec!["Feedwater Tank".to_string()]
        );

        let foreign: BTreeSet<Atom> = [atom("Boiler", "hot")].into();
        assert!(matches!(
            merged.check_traceability(&foreign),
            Err(OntologyError::UnknownConcept(..))
        ));
    }

    #[test]
    fn document_round_trip_and_errors() {
        let o = minimal_ontology();
        let text = save_ontology(&o);
        assert_eq!(load_ontology(&text).unwrap(), o);
        assert_eq!(save_ontology(&load_ontology(&text).unwrap()), text);

        let missing = r#"{"vertex_labels":[],"arc_labels":[],"stage_version":1,"vertices":[]}"#;
        let err = load_ontology(missing).unwrap_err().to_string();
        assert!(err.contains("arcs"), "{err}");

        let dup = r#"{"vertex_labels":["concept"],"arc_labels":[],"stage_version":1,
            "vertices":[{"id":"A","labels":["concept"]},{"id":"A","labels":[]}],"arcs":[]}"#;
        assert!(matches!(
            load_ontology(dup),
            Err(OntologyError::DuplicateId { kind: "vertex", .. })
        ));
    }
}
