//! Test-case generation by bounded unrolling of a requirement state machine.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::BoolExpr;
use crate::rsl::Requirement;

pub const DEFAULT_MAX_DEPTH: usize = 16;
pub const DEFAULT_MAX_REPEAT: usize = 1;

/// Enumeration bounds. `max_depth` counts test steps, so a path with `k`
/// transitions needs `k + 2` levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub max_depth: usize,
    pub max_repeat: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_depth: DEFAULT_MAX_DEPTH,
            max_repeat: DEFAULT_MAX_REPEAT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TestStep {
    pub pre: BoolExpr,
    /// `None` only on the final (release) step.
    pub post: Option<BoolExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub steps: Vec<TestStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestCaseError {
    #[error("test case {0} has no steps")]
    Empty(String),
    #[error("test case {id}: step {step} has a null post-condition but is not the last step")]
    NullBeforeEnd { id: String, step: usize },
    #[error("test case {id}: last step must have a null post-condition")]
    MissingNullEnd { id: String },
}

impl TestCase {
    /// Checks the step-shape invariant: non-empty, NULL post-condition on
    /// the last step and nowhere else.
    pub fn check_shape(&self) -> Result<(), TestCaseError> {
        let n = self.steps.len();
        if n == 0 {
            return Err(TestCaseError::Empty(self.id.clone()));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.post.is_none() && i + 1 < n {
                return Err(TestCaseError::NullBeforeEnd {
                    id: self.id.clone(),
                    step: i + 1,
                });
            }
        }
        if self.steps[n - 1].post.is_some() {
            return Err(TestCaseError::MissingNullEnd {
                id: self.id.clone(),
            });
        }
        Ok(())
    }

    pub fn atoms(&self) -> BTreeSet<crate::expr::Atom> {
        self.steps
            .iter()
            .flat_map(|s| {
                s.pre
                    .atoms()
                    .into_iter()
                    .chain(s.post.iter().flat_map(|p| p.atoms()))
            })
            .collect()
    }
}

/// What led into a tree node; indices point into the requirement's
/// `entry`, `transitions` and `release` lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Root,
    Entry(usize),
    Transition(usize),
    Release(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub edge: Edge,
    /// FSM state occupied at this node; `None` for the root and for
    /// release leaves.
    pub state: Option<String>,
    pub depth: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Bounded unrolling of a requirement. Node 0 is the virtual root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCaseTree {
    pub nodes: Vec<TreeNode>,
    pub bounds: Bounds,
}

impl TestCaseTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Release leaves in depth-first order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if matches!(node.edge, Edge::Release(_)) {
                out.push(n);
            }
            stack.extend(node.children.iter().rev());
        }
        out
    }

    /// Edges from the root (exclusive) to `leaf`.
    pub fn path_to(&self, leaf: usize) -> Vec<Edge> {
        let mut edges = Vec::new();
        let mut cur = Some(leaf);
        while let Some(n) = cur {
            let node = &self.nodes[n];
            if node.edge != Edge::Root {
                edges.push(node.edge);
            }
            cur = node.parent;
        }
        edges.reverse();
        edges
    }

    /// Internal nodes that sit in an FSM state (excludes root and leaves).
    pub fn state_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.state.is_some()).count()
    }
}

pub fn build_tree(r: &Requirement, bounds: Bounds) -> TestCaseTree {
    let mut tree = TestCaseTree {
        nodes: vec![TreeNode {
            edge: Edge::Root,
            state: None,
            depth: 0,
            parent: None,
            children: vec![],
        }],
        bounds,
    };
    if bounds.max_depth == 0 {
        return tree;
    }
    let mut uses = vec![0usize; r.transitions.len()];
    for i in 0..r.entry.len() {
        let n = push(&mut tree, 0, Edge::Entry(i), Some(r.initial.clone()));
        expand(r, &mut tree, n, &mut uses);
    }
    tree
}

fn push(tree: &mut TestCaseTree, parent: usize, edge: Edge, state: Option<String>) -> usize {
    let depth = tree.nodes[parent].depth + 1;
    let id = tree.nodes.len();
    tree.nodes.push(TreeNode {
        edge,
        state,
        depth,
        parent: Some(parent),
        children: vec![],
    });
    tree.nodes[parent].children.push(id);
    id
}

fn expand(r: &Requirement, tree: &mut TestCaseTree, node: usize, uses: &mut [usize]) {
    let depth = tree.nodes[node].depth;
    if depth >= tree.bounds.max_depth {
        return;
    }
    let state = tree.nodes[node].state.clone().expect("state node");
    for (i, t) in r.transitions.iter().enumerate() {
        if t.source != state || uses[i] >= tree.bounds.max_repeat {
            continue;
        }
        uses[i] += 1;
        let child = push(tree, node, Edge::Transition(i), Some(t.target.clone()));
        expand(r, tree, child, uses);
        uses[i] -= 1;
    }
    for (i, rc) in r.release.iter().enumerate() {
        if rc.state == state {
            push(tree, node, Edge::Release(i), None);
        }
    }
}

fn steps_for_path(r: &Requirement, path: &[Edge]) -> Vec<TestStep> {
    path.iter()
        .map(|edge| match *edge {
            Edge::Entry(i) => TestStep {
                pre: r.entry[i].clone(),
                post: Some(r.stay_condition(&r.initial)),
            },
            Edge::Transition(i) => {
                let t = &r.transitions[i];
                TestStep {
                    pre: BoolExpr::conjoin(&t.guards),
                    post: Some(r.stay_condition(&t.target)),
                }
            }
            Edge::Release(i) => TestStep {
                pre: r.release[i].condition.clone(),
                post: None,
            },
            Edge::Root => unreachable!("root is not on a path"),
        })
        .collect()
}

/// Test cases of one tree, numbered in depth-first leaf order.
pub fn cases_from_tree(r: &Requirement, tree: &TestCaseTree, stage: u32) -> Vec<TestCase> {
    tree.leaves()
        .into_iter()
        .enumerate()
        .map(|(n, leaf)| TestCase {
            id: format!("{}_TC{}_V{}", r.id, n + 1, stage),
            steps: steps_for_path(r, &tree.path_to(leaf)),
        })
        .collect()
}

pub fn generate(r: &Requirement, bounds: Bounds, stage: u32) -> Vec<TestCase> {
    cases_from_tree(r, &build_tree(r, bounds), stage)
}

pub mod oracle {
    //! Brute-force enumeration of entry-to-release condition sequences,
    //! written without reference to the tree.

    use std::collections::{BTreeMap, BTreeSet};

    use super::{Bounds, TestStep};
    use crate::expr::BoolExpr;
    use crate::rsl::Requirement;

    pub fn path_oracle(r: &Requirement, bounds: Bounds) -> BTreeSet<Vec<TestStep>> {
        let mut out = BTreeSet::new();
        for e in &r.entry {
            let first = TestStep {
                pre: e.clone(),
                post: Some(stay(r, &r.initial)),
            };
            walk(
                r,
                bounds,
                &r.initial,
                vec![first],
                &mut BTreeMap::new(),
                &mut out,
            );
        }
        out
    }

    fn stay(r: &Requirement, q: &str) -> BoolExpr {
        let mut it = r
            .states
            .iter()
            .filter(|s| s.id == q)
            .flat_map(|s| s.stay.iter().cloned());
        match it.next() {
            None => BoolExpr::True,
            Some(first) => it.fold(first, |acc, e| BoolExpr::And(Box::new(acc), Box::new(e))),
        }
    }

    fn walk(
        r: &Requirement,
        bounds: Bounds,
        q: &str,
        prefix: Vec<TestStep>,
        used: &mut BTreeMap<usize, usize>,
        out: &mut BTreeSet<Vec<TestStep>>,
    ) {
        if prefix.len() > bounds.max_depth {
            return;
        }
        if prefix.len() < bounds.max_depth {
            for rc in r.release.iter().filter(|rc| rc.state == q) {
                let mut path = prefix.clone();
                path.push(TestStep {
                    pre: rc.condition.clone(),
                    post: None,
                });
                out.insert(path);
            }
        }
        for (i, t) in r.transitions.iter().enumerate() {
            if t.source != q {
                continue;
            }
            let count = used.get(&i).copied().unwrap_or(0);
            if count >= bounds.max_repeat {
                continue;
            }
            let guard = match t.guards.split_first() {
                None => BoolExpr::True,
                Some((g, rest)) => rest.iter().fold(g.clone(), |acc, e| {
                    BoolExpr::And(Box::new(acc), Box::new(e.clone()))
                }),
            };
            let mut next = prefix.clone();
            next.push(TestStep {
                pre: guard,
                post: Some(stay(r, &t.target)),
            });
            used.insert(i, count + 1);
            walk(r, bounds, &t.target, next, used, out);
            used.insert(i, count);
        }
    }
}

pub use oracle::path_oracle;

/// Writes test cases as a `.tc.json` document.
pub fn save_test_cases_json(tcs: &[TestCase]) -> String {
    let mut s = serde_json::to_string_pretty(tcs).expect("test cases serialize");
    s.push('\n');
    s
}

pub fn load_test_cases_json(text: &str) -> Result<Vec<TestCase>, serde_json::Error> {
    serde_json::from_str(text)
}
