mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng;
use reqcase::executor::{
    execute, export_csv, import_csv, load_trace_csv, run_suite, save_trace_csv, CellOutcome, Trace,
    TraceError, Verdict, TEST_CASE_HEADER,
};
use reqcase::expr::{parse_expr, Atom, BoolExpr};
use reqcase::testgen::{TestCase, TestStep};

use common::{awkward_name, random_test_case, random_trace, rng, small_atoms};

/// The scan semantics written out sample by sample.
fn reference(tc: &TestCase, trace: &Trace) -> Verdict {
    let holds = |e: &BoolExpr, k: usize| e.eval(&trace.valuation(k)).unwrap();
    let n = tc.steps.len();
    let mut active: Option<usize> = None;
    for k in 0..trace.len() {
        let i = match active {
            // Arming and a first advance may share a sample.
            None if holds(&tc.steps[0].pre, k) => usize::from(n > 1 && holds(&tc.steps[1].pre, k)),
            None => continue,
            Some(i) if holds(&tc.steps[i + 1].pre, k) => i + 1,
            Some(i) => i,
        };
        if i == n - 1 {
            return Verdict::Pass { released: true };
        }
        let post = tc.steps[i].post.as_ref().unwrap();
        if !holds(post, k) {
            return Verdict::Fail {
                step: i + 1,
                time: trace.samples()[k].time,
                violated: post.clone(),
            };
        }
        active = Some(i);
    }
    match active {
        None => Verdict::NotTriggered,
        Some(_) => Verdict::Pass { released: false },
    }
}

fn case(rng: &mut impl Rng, n_atoms: usize) -> (TestCase, Trace) {
    let atoms = small_atoms(n_atoms);
    let tc = random_test_case(rng, &atoms, "T_TC1_V1");
    let len = rng.gen_range(0..12);
    (tc, random_trace(rng, &atoms, len))
}

fn e(s: &str) -> BoolExpr {
    parse_expr(s).unwrap()
}

fn trace_of(atoms: &[&str], rows: &[&[u8]]) -> Trace {
    let atoms: Vec<Atom> = atoms.iter().map(|s| Atom::from_inner(s).unwrap()).collect();
    let mut t = Trace::new(atoms, vec![]).unwrap();
    for (k, row) in rows.iter().enumerate() {
        t.push(k as f64, row.iter().map(|&b| b == 1).collect(), vec![])
            .unwrap();
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn execute_agrees_with_reference(seed in any::<u64>()) {
        let (tc, trace) = case(&mut rng(seed), 3);
        prop_assert_eq!(execute(&tc, &trace).unwrap(), reference(&tc, &trace));
    }

    #[test]
    fn fail_points_at_a_real_violation(seed in any::<u64>()) {
        let (tc, trace) = case(&mut rng(seed), 2);
        if let Verdict::Fail { step, time, violated } = execute(&tc, &trace).unwrap() {
            prop_assert!(step >= 1 && step < tc.steps.len());
            let k = trace.samples().iter().position(|s| s.time == time);
            prop_assert!(k.is_some());
            prop_assert_eq!(Some(&violated), tc.steps[step - 1].post.as_ref());
            prop_assert!(!violated.eval(&trace.valuation(k.unwrap())).unwrap());
        }
    }

    #[test]
    fn false_trigger_never_arms(seed in any::<u64>()) {
        let (mut tc, trace) = case(&mut rng(seed), 3);
        tc.steps[0].pre = BoolExpr::False;
        prop_assert_eq!(execute(&tc, &trace).unwrap(), Verdict::NotTriggered);
    }

    #[test]
    fn satisfied_posts_never_fail(seed in any::<u64>()) {
        let (mut tc, trace) = case(&mut rng(seed), 3);
        let n = tc.steps.len();
        for s in &mut tc.steps[..n - 1] {
            s.post = Some(BoolExpr::or(s.post.clone().unwrap(), BoolExpr::not(s.post.clone().unwrap())));
        }
        let failed = matches!(execute(&tc, &trace).unwrap(), Verdict::Fail { .. });
        prop_assert!(!failed);
    }

    #[test]
    fn test_case_csv_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let atoms: Vec<Atom> = (0..4).map(|_| Atom::new(&awkward_name(&mut r), &awkward_name(&mut r)).unwrap()).collect();
        let tcs: Vec<TestCase> = (0..r.gen_range(0..4))
            .map(|i| random_test_case(&mut r, &atoms, &format!("R{}_TC{}_V1", seed % 97, i + 1)))
            .collect();
        let text = export_csv(&tcs);
        prop_assert!(text.starts_with(TEST_CASE_HEADER));
        prop_assert!(!text.contains('\r'));
        prop_assert_eq!(import_csv(&text).unwrap(), tcs);
    }

    #[test]
    fn trace_csv_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let atoms: Vec<Atom> = (0..3).map(|_| Atom::new(&awkward_name(&mut r), &awkward_name(&mut r)).unwrap()).collect();
        let mut unique = atoms.clone();
        unique.sort();
        unique.dedup();
        let len = r.gen_range(0..30);
        let trace = random_trace(&mut r, &unique, len);
        let text = save_trace_csv(&trace);
        let back = load_trace_csv(&text).unwrap();
        prop_assert_eq!(&back, &trace);
        prop_assert_eq!(save_trace_csv(&back), text);
    }
}

#[test]
fn advancement_wins_over_violation() {
    let tc = TestCase {
        id: "T".into(),
        steps: vec![
            TestStep {
                pre: e("{a.x}"),
                post: Some(e("{a.y}")),
            },
            TestStep {
                pre: e("{a.x}"),
                post: None,
            },
        ],
    };
    let trace = trace_of(&["a.x", "a.y"], &[&[1, 0]]);
    assert_eq!(
        execute(&tc, &trace).unwrap(),
        Verdict::Pass { released: true }
    );
}

#[test]
fn activation_sample_is_checked() {
    let tc = TestCase {
        id: "T".into(),
        steps: vec![
            TestStep {
                pre: e("{a.x}"),
                post: Some(e("{a.y}")),
            },
            TestStep {
                pre: e("false"),
                post: None,
            },
        ],
    };
    let trace = trace_of(&["a.x", "a.y"], &[&[0, 0], &[1, 0], &[1, 1]]);
    assert_eq!(
        execute(&tc, &trace).unwrap(),
        Verdict::Fail {
            step: 1,
            time: 1.0,
            violated: e("{a.y}")
        }
    );
}

#[test]
fn empty_export_is_header_only() {
    assert_eq!(export_csv(&[]), format!("{TEST_CASE_HEADER}\n"));
    assert_eq!(import_csv(&export_csv(&[])).unwrap(), vec![]);
}

#[test]
fn trace_csv_errors() {
    let t = load_trace_csv("time,{a.x}\n0,1\n0.5,0\n").unwrap();
    assert_eq!(t.len(), 2);
    let err = load_trace_csv("time,{a.x}\n1,1\n0.5,0\n").unwrap_err();
    assert!(
        matches!(err, TraceError::Csv { line: 3, ref message } if message.contains("does not increase")),
        "{err}"
    );
    assert!(load_trace_csv("time,{a.x}\n0,2\n").is_err());
    assert!(load_trace_csv("time,{a.x}\n0,1,1\n").is_err());
    assert!(load_trace_csv("time,{a.x},{a.x}\n0,1,1\n").is_err());
}

#[test]
fn test_case_csv_errors() {
    let h = TEST_CASE_HEADER;
    assert!(import_csv("id,step,pre,post\n").is_err());
    assert!(import_csv(&format!("{h}\nT,1,\"({{a.x}})\"\n")).is_err());
    assert!(import_csv(&format!("{h}\nT,1,\"({{a.x}} &)\",null\n")).is_err());
    assert!(import_csv(&format!("{h}\nT,1,\"({{a.x}})\",\"({{a.y}})\"\n")).is_err());
}

#[test]
fn suite_records_missing_atoms_per_cell() {
    let tc = TestCase {
        id: "T".into(),
        steps: vec![
            TestStep {
                pre: e("{a.x}"),
                post: Some(e("{a.y}")),
            },
            TestStep {
                pre: e("{a.z}"),
                post: None,
            },
        ],
    };
    let mut traces = BTreeMap::new();
    traces.insert(
        "full".to_string(),
        trace_of(&["a.x", "a.y", "a.z"], &[&[1, 1, 0]]),
    );
    traces.insert("partial".to_string(), trace_of(&["a.x", "a.y"], &[&[1, 1]]));
    let report = run_suite(&[tc], &traces);
    assert_eq!(
        report.cell("T", "full").unwrap().outcome,
        CellOutcome::Verdict(Verdict::Pass { released: false })
    );
    assert!(
        matches!(report.cell("T", "partial").unwrap().outcome, CellOutcome::Error(ref m) if m.contains("{a.z}"))
    );
    assert_eq!((report.counts.pass, report.counts.error), (1, 1));

    let empty = run_suite(&[], &traces);
    assert!(empty.cells.is_empty());
    assert_eq!(empty.counts, Default::default());
}
