//! Generates test cases for three tank-level requirements and runs each one
//! on its scenario against both the ideal model and the rippling plant.
//!
//! ```bash
//! cargo run --example model_vs_plant
//! ```

use std::path::Path;

use reqcase::executor::execute;
use reqcase::ontology::load_ontology;
use reqcase::rsl::parse_rsl;
use reqcase::testgen::{generate, Bounds};
use reqcase::wps_sim::{default_binding, load_script, run_scenario, PlantParams, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wps");
    let o = load_ontology(&std::fs::read_to_string(dir.join("stage1.onto.json"))?)?;
    let reqs = parse_rsl(&std::fs::read_to_string(dir.join("requirements.rsl"))?, &o)?;
    let params = PlantParams::from_json(&std::fs::read_to_string(dir.join("params.json"))?)?;
    let binding = default_binding(&o)?;

    // (requirement, scenario) pairs: never-underflow while draining, staged
    // descent towards LL, and no alarm while held just below H.
    let pairs = [
        ("R1_3", "drain"),
        ("R1_4", "staged_descent"),
        ("R2_1", "near_high"),
    ];
    for (req_id, scenario) in pairs {
        let r = reqs
            .iter()
            .find(|r| r.id == req_id)
            .expect("requirement in project");
        let tc = &generate(r, Bounds::default(), r.stage)[0];
        let script = load_script(&std::fs::read_to_string(
            dir.join("scenarios").join(format!("{scenario}.json")),
        )?)?;
        for variant in [Variant::Model, Variant::Plant] {
            let trace = run_scenario(&params, &script, &binding, variant)?;
            let levels: Vec<f64> = (0..trace.len())
                .map(|k| trace.analog(k, "level").unwrap())
                .collect();
            let min = levels.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            println!(
                "{:<12} {:<15} {:<6} level [{min:6.2}, {max:6.2}]  {}",
                tc.id,
                scenario,
                variant,
                execute(tc, &trace)?
            );
        }
    }
    Ok(())
}
