#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use reqcase::executor::Trace;
use reqcase::expr::{Atom, BoolExpr};
use reqcase::ontology::Ontology;
use reqcase::rsl::{Release, ReqState, Requirement, Transition};
use reqcase::testgen::{TestCase, TestStep};
use reqcase::wps_sim::wps_ontology;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wps")
}

pub fn read_data(rel: &str) -> String {
    std::fs::read_to_string(data_dir().join(rel)).expect("bundled data file")
}

const NAME_CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_- ";

/// A name over letters, digits, `_`, `-` and inner spaces.
pub fn name(rng: &mut impl Rng, prefix: &str) -> String {
    let len = rng.gen_range(1..=8);
    let mut s: String = prefix.to_string();
    for _ in 0..len {
        s.push(*NAME_CHARS.choose(rng).unwrap() as char);
    }
    s.trim().to_string()
}

/// A name that also uses characters the CSV writer must quote.
pub fn awkward_name(rng: &mut impl Rng) -> String {
    const EXTRA: &[&str] = &[
        ",", "\"", "'", "é", "\u{3b1}", "(", ")", "!", "&", "|", "  ",
    ];
    let mut s = name(rng, "n");
    for _ in 0..rng.gen_range(0..3) {
        let at = rng.gen_range(1..=s.len());
        if s.is_char_boundary(at) {
            s.insert_str(at, EXTRA.choose(rng).unwrap());
        }
    }
    s.trim().to_string()
}

pub fn random_expr(rng: &mut impl Rng, atoms: &[Atom], depth: u32) -> BoolExpr {
    let leaf = depth == 0 || rng.gen_bool(0.35);
    if leaf {
        return match rng.gen_range(0..10) {
            0 => BoolExpr::True,
            1 => BoolExpr::False,
            _ => BoolExpr::Atom(atoms.choose(rng).unwrap().clone()),
        };
    }
    match rng.gen_range(0..3) {
        0 => BoolExpr::not(random_expr(rng, atoms, depth - 1)),
        1 => BoolExpr::and(
            random_expr(rng, atoms, depth - 1),
            random_expr(rng, atoms, depth - 1),
        ),
        _ => BoolExpr::or(
            random_expr(rng, atoms, depth - 1),
            random_expr(rng, atoms, depth - 1),
        ),
    }
}

pub fn wps_atoms() -> Vec<Atom> {
    wps_ontology()
        .induced_atoms()
        .unwrap()
        .into_iter()
        .collect()
}

/// A valid requirement over `atoms` with at most `max_states` states and
/// `max_transitions` transitions.
pub fn random_requirement(
    rng: &mut impl Rng,
    atoms: &[Atom],
    id: &str,
    max_states: usize,
    max_transitions: usize,
) -> Requirement {
    let n = rng.gen_range(1..=max_states);
    let ids: Vec<String> = (0..n).map(|i| format!("rs_{i}")).collect();
    let states = ids
        .iter()
        .map(|id| ReqState {
            id: id.clone(),
            stay: (0..rng.gen_range(0..=2))
                .map(|_| random_expr(rng, atoms, 2))
                .collect(),
        })
        .collect();
    let mut keys = BTreeSet::new();
    let mut transitions = Vec::new();
    for _ in 0..rng.gen_range(0..=max_transitions) {
        let source = ids.choose(rng).unwrap().clone();
        let guards: Vec<BoolExpr> = (0..rng.gen_range(0..=2))
            .map(|_| random_expr(rng, atoms, 2))
            .collect();
        if keys.insert((
            source.clone(),
            guards.iter().cloned().collect::<BTreeSet<_>>(),
        )) {
            transitions.push(Transition {
                source,
                guards,
                target: ids.choose(rng).unwrap().clone(),
            });
        }
    }
    let release = (0..rng.gen_range(1..=3))
        .map(|_| Release {
            state: ids.choose(rng).unwrap().clone(),
            condition: random_expr(rng, atoms, 2),
        })
        .collect();
    Requirement {
        id: id.to_string(),
        stage: 1,
        states,
        initial: ids[0].clone(),
        transitions,
        entry: (0..rng.gen_range(1..=2))
            .map(|_| random_expr(rng, atoms, 2))
            .collect(),
        release,
    }
}

/// A valid ontology with random concept and state names, containment arcs
/// and a user-defined label on each side.
pub fn random_ontology(rng: &mut impl Rng, stage: u32) -> Ontology {
    let mut o = Ontology::new(stage);
    let mut concepts = Vec::new();
    for i in 0..rng.gen_range(1..=5) {
        let c = name(rng, &format!("C{i}"));
        if rng.gen_bool(0.3) {
            o.add_vertex(&c, ["concept", "component"]);
        } else {
            o.add_concept(&c);
        }
        concepts.push(c);
    }
    let mut states = Vec::new();
    for i in 0..rng.gen_range(0..=5) {
        let s = name(rng, &format!("s{i}"));
        o.add_state_vertex(&s);
        states.push(s);
    }
    for c in &concepts {
        for s in &states {
            if rng.gen_bool(0.4) {
                o.attach_state(c, s);
            }
        }
    }
    for (i, parent) in concepts.iter().enumerate() {
        for child in &concepts[i + 1..] {
            if rng.gen_bool(0.3) {
                o.contains(parent, child);
            }
        }
    }
    if concepts.len() > 1 && rng.gen_bool(0.5) {
        let id = format!("feeds:{}", concepts[0]);
        o.add_arc(&id, &concepts[1], &concepts[0], ["feeds"]);
    }
    o
}

/// A test case of the generated shape: `n - 1` steps with post-conditions
/// followed by a release step.
pub fn random_test_case(rng: &mut impl Rng, atoms: &[Atom], id: &str) -> TestCase {
    let n = rng.gen_range(1..=4);
    let steps = (0..n)
        .map(|i| TestStep {
            pre: random_expr(rng, atoms, 3),
            post: (i + 1 < n).then(|| random_expr(rng, atoms, 3)),
        })
        .collect();
    TestCase {
        id: id.to_string(),
        steps,
    }
}

/// A trace over `atoms` with strictly increasing, irregular times and a
/// couple of analog columns.
pub fn random_trace(rng: &mut impl Rng, atoms: &[Atom], len: usize) -> Trace {
    let analogs = vec!["level".to_string(), "x y".to_string()];
    let mut t = Trace::new(atoms.to_vec(), analogs).unwrap();
    let mut time: f64 = rng.gen_range(-5.0..5.0);
    for _ in 0..len {
        let values = atoms.iter().map(|_| rng.gen_bool(0.5)).collect();
        let a = vec![
            rng.gen_range(-1e6..1e6),
            rng.gen::<f64>() * 10f64.powi(rng.gen_range(-300..300)),
        ];
        t.push(time, values, a).unwrap();
        time += rng.gen_range(1e-6..3.0);
    }
    t
}

/// Atoms `{a.x}`, `{a.y}`, ... used by small executor traces.
pub fn small_atoms(n: usize) -> Vec<Atom> {
    ["x", "y", "z", "w"][..n]
        .iter()
        .map(|s| Atom::new("a", s).unwrap())
        .collect()
}
