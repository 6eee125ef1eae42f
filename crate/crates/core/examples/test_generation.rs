//! Unrolls requirement state machines into test cases and compares the
//! result with the brute-force path enumeration.
//!
//! ```bash
//! cargo run --example test_generation
//! ```

use reqcase::rsl::parse_rsl;
use reqcase::testgen::{build_tree, generate, path_oracle, Bounds};
use reqcase::wps_sim::wps_ontology;

const LOOPING: &str = r#"
requirement R9 stage 1 fsm {
    entry: {System.normal system operation};
    state idle { stay: !{FeedWater Alarm.raised}; }
    state low { stay: {Feedwater Tank.level low}; }
    trans idle -> low when {Feedwater Tank.level low};
    trans low -> idle when !{Feedwater Tank.level low};
    release low: {Feedwater Tank.underflows};
    release idle: !{System.normal system operation};
}
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let o = wps_ontology();
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wps/requirements.rsl");
    let mut reqs = parse_rsl(&std::fs::read_to_string(path)?, &o)?;
    reqs.extend(parse_rsl(LOOPING, &o)?);

    for r in &reqs {
        println!(
            "{} ({} states, {} transitions)",
            r.id,
            r.states.len(),
            r.transitions.len()
        );
        for repeat in [1, 2] {
            let bounds = Bounds {
                max_depth: 8,
                max_repeat: repeat,
            };
            let tree = build_tree(r, bounds);
            let tcs = generate(r, bounds, r.stage);
            let same = tcs
                .iter()
                .map(|t| t.steps.clone())
                .collect::<std::collections::BTreeSet<_>>()
                == path_oracle(r, bounds);
            println!(
                "  repeat {repeat}: {} tree nodes, {} test cases, oracle agrees: {same}",
                tree.nodes.len(),
                tcs.len()
            );
        }
        for tc in generate(r, Bounds::default(), r.stage) {
            println!("  {}", tc.id);
            for (i, s) in tc.steps.iter().enumerate() {
                let post = s
                    .post
                    .as_ref()
                    .map_or("NULL".to_string(), |p| p.to_string());
                println!("    {}. {}  =>  {}", i + 1, s.pre, post);
            }
        }
    }
    Ok(())
}
