mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng;
use reqcase::expr::{parse_expr, Atom, BoolExpr};
use reqcase::ontology::Ontology;
use reqcase::rsl::{
    instantiate_boilerplate, parse_rsl, print_rsl, validate_requirement, Boilerplate, ReqViolation,
    RslError, SlotValue,
};
use reqcase::wps_sim::{minimal_ontology, wps_ontology};

use common::{random_expr, random_ontology, random_requirement, rng, wps_atoms};

fn project() -> (Ontology, Vec<reqcase::rsl::Requirement>) {
    let o = wps_ontology();
    let reqs = parse_rsl(&common::read_data("requirements.rsl"), &o).unwrap();
    (o, reqs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_then_parse_is_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut o = random_ontology(&mut r, 1);
        let mut atoms: Vec<Atom> = o.induced_atoms().unwrap().into_iter().collect();
        if atoms.is_empty() {
            o = wps_ontology();
            atoms = wps_atoms();
        }
        let reqs: Vec<_> = (0..r.gen_range(1..4))
            .map(|i| random_requirement(&mut r, &atoms, &format!("R{i}_{seed}"), 5, 6))
            .collect();
        let text = print_rsl(&reqs);
        let back = parse_rsl(&text, &o).unwrap();
        prop_assert_eq!(back, reqs);
    }

    #[test]
    fn never_pattern_shape(seed in any::<u64>()) {
        let mut r = rng(seed);
        let o = wps_ontology();
        let atoms = wps_atoms();
        let mut b = BTreeMap::new();
        b.insert("trigger".to_string(), SlotValue::Formula(random_expr(&mut r, &atoms, 2)));
        b.insert("sys".to_string(), SlotValue::Concept("Feedwater Tank".into()));
        let bad = random_expr(&mut r, &atoms, 2);
        b.insert("bad".to_string(), SlotValue::Formula(bad.clone()));
        let req = instantiate_boilerplate(&Boilerplate::b1(), "Rx", 1, &b, &o).unwrap();
        prop_assert_eq!(req.states.len(), 1);
        prop_assert_eq!(req.entry.len(), 1);
        prop_assert_eq!(req.release.len(), 1);
        prop_assert!(req.transitions.is_empty());
        prop_assert_eq!(&req.states[0].stay, &vec![BoolExpr::not(req.release[0].condition.clone())]);
        prop_assert!(validate_requirement(&req, &o).is_empty());
    }

    #[test]
    fn parsed_formulas_stay_inside_the_ontology(seed in any::<u64>()) {
        let o = wps_ontology();
        let induced = o.induced_atoms().unwrap();
        let req = random_requirement(&mut rng(seed), &wps_atoms(), "R1", 5, 6);
        for parsed in parse_rsl(&print_rsl(&[req]), &o).unwrap() {
            prop_assert!(parsed.atoms().is_subset(&induced));
        }
    }

    #[test]
    fn foreign_atoms_are_named(seed in any::<u64>()) {
        let mut req = random_requirement(&mut rng(seed), &wps_atoms(), "R1", 5, 6);
        let foreign = Atom::new("Boiler", "cracked").unwrap();
        req.states[0].stay.push(BoolExpr::Atom(foreign.clone()));
        let vs = validate_requirement(&req, &wps_ontology());
        let named = vs.iter().any(|v| matches!(v, ReqViolation::ForeignAtom { atom, .. } if *atom == foreign));
        prop_assert!(named, "{:?}", vs);
        let printed = vs.iter().any(|v| v.to_string().contains("{Boiler.cracked}"));
        prop_assert!(printed, "{:?}", vs);
    }
}

#[test]
fn bundled_requirements_round_trip() {
    let (o, reqs) = project();
    assert_eq!(reqs.len(), 5);
    assert_eq!(parse_rsl(&print_rsl(&reqs), &o).unwrap(), reqs);
    for r in &reqs {
        assert!(validate_requirement(r, &o).is_empty(), "{}", r.id);
    }
}

#[test]
fn r1_3_block_is_the_single_state_never_machine() {
    let o = minimal_ontology();
    let text = "requirement R1_3 stage 1 uses B1 { trigger = {System.normal system operation}; \
                sys = Feedwater Tank; bad = {Feedwater Tank.underflows}; }";
    let r = &parse_rsl(text, &o).unwrap()[0];
    assert_eq!(r.id, "R1_3");
    assert_eq!(r.initial, "rs_0");
    assert_eq!(
        r.entry,
        vec![parse_expr("{System.normal system operation}").unwrap()]
    );
    assert_eq!(
        r.states[0].stay,
        vec![parse_expr("!{Feedwater Tank.underflows}").unwrap()]
    );
    assert_eq!(r.release[0].state, "rs_0");
    assert_eq!(
        r.release[0].condition,
        parse_expr("{Feedwater Tank.underflows}").unwrap()
    );
}

#[test]
fn response_pattern() {
    let o = wps_ontology();
    let text = "requirement R2 stage 1 uses B2 { trigger = {Feedwater Tank.overflows} | {Feedwater Tank.underflows}; \
                sys = FeedWater Alarm; response = {FeedWater Alarm.raised}; }";
    let r = &parse_rsl(text, &o).unwrap()[0];
    let trigger = parse_expr("{Feedwater Tank.overflows} | {Feedwater Tank.underflows}").unwrap();
    assert_eq!(r.entry, vec![trigger.clone()]);
    assert_eq!(
        r.states[0].stay,
        vec![parse_expr("{FeedWater Alarm.raised}").unwrap()]
    );
    assert_eq!(r.release[0].condition, BoolExpr::not(trigger));
}

#[test]
fn staged_descent_has_two_states() {
    let (_, reqs) = project();
    let r = reqs.iter().find(|r| r.id == "R1_4").unwrap();
    assert_eq!(r.states.len(), 2);
    assert_eq!(r.transitions.len(), 1);
}

#[test]
fn instantiation_errors() {
    let o = minimal_ontology();
    let mut b = BTreeMap::new();
    b.insert(
        "trigger".to_string(),
        SlotValue::Formula(parse_expr("{System.normal system operation}").unwrap()),
    );
    b.insert(
        "sys".to_string(),
        SlotValue::Concept("Feedwater Tank".into()),
    );
    let err = instantiate_boilerplate(&Boilerplate::b1(), "R", 1, &b, &o).unwrap_err();
    assert!(err.to_string().contains("bad"), "{err}");

    b.insert(
        "bad".to_string(),
        SlotValue::Formula(parse_expr("{Feedwater Tank.leaks}").unwrap()),
    );
    let err = instantiate_boilerplate(&Boilerplate::b1(), "R", 1, &b, &o).unwrap_err();
    assert!(err.to_string().contains("{Feedwater Tank.leaks}"), "{err}");

    b.insert(
        "bad".to_string(),
        SlotValue::Concept("Feedwater Tank".into()),
    );
    assert!(instantiate_boilerplate(&Boilerplate::b1(), "R", 1, &b, &o).is_err());
}

#[test]
fn undeclared_transition_target_and_syntax_errors() {
    let o = wps_ontology();
    let text = "requirement R stage 1 fsm {\n  entry: {System.normal system operation};\n  state a { stay: true; }\n  trans a -> b when true;\n  release a: false;\n}\n";
    match parse_rsl(text, &o) {
        Err(RslError::Invalid { violations, .. }) => {
            assert!(
                violations.iter().any(|v| v.to_string().contains(" b")),
                "{violations:?}"
            );
        }
        other => panic!("{other:?}"),
    }
    let err = parse_rsl(
        "requirement R stage 1 fsm {\n  entry: {System.normal system operation} &;\n}",
        &o,
    )
    .unwrap_err();
    assert!(
        matches!(err, RslError::Syntax { pos, .. } if pos.line == 2),
        "{err}"
    );
    let err = parse_rsl("requirement R stage 1 uses B7 { }", &o).unwrap_err();
    assert!(matches!(err, RslError::UnknownBoilerplate { .. }), "{err}");
}

#[test]
fn requirement_mutations() {
    let (o, reqs) = project();
    for r in &reqs {
        let mut m = r.clone();
        m.entry.clear();
        assert_eq!(
            validate_requirement(&m, &o),
            vec![ReqViolation::NoEntryCondition]
        );

        let mut m = r.clone();
        let t = m
            .transitions
            .first()
            .cloned()
            .unwrap_or(reqcase::rsl::Transition {
                source: m.initial.clone(),
                guards: vec![BoolExpr::True],
                target: m.initial.clone(),
            });
        m.transitions.push(t.clone());
        m.transitions.push(t.clone());
        let vs = validate_requirement(&m, &o);
        assert!(
            vs.iter().any(
                |v| matches!(v, ReqViolation::NotAFunction { source, .. } if *source == t.source)
            ),
            "{vs:?}"
        );
    }
}
