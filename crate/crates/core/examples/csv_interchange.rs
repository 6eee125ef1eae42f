//! Writes test cases and a simulated trace in the comma-separated
//! interchange formats, reads them back and executes the imported copies.
//!
//! ```bash
//! cargo run --example csv_interchange
//! ```

use reqcase::executor::{export_csv, import_csv, load_trace_csv, run_suite, save_trace_csv};
use reqcase::rsl::parse_rsl;
use reqcase::testgen::{generate, Bounds};
use reqcase::wps_sim::{
    default_binding, load_script, run_scenario, wps_ontology, PlantParams, Variant,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wps");
    let o = wps_ontology();
    let reqs = parse_rsl(&std::fs::read_to_string(dir.join("requirements.rsl"))?, &o)?;
    let tcs: Vec<_> = reqs
        .iter()
        .flat_map(|r| generate(r, Bounds::default(), r.stage))
        .collect();

    let csv = export_csv(&tcs);
    print!("{csv}");
    let back = import_csv(&csv)?;
    println!("test cases survive the round trip: {}\n", back == tcs);

    let script = load_script(&std::fs::read_to_string(
        dir.join("scenarios/near_high.json"),
    )?)?;
    let trace = run_scenario(
        &PlantParams::default(),
        &script,
        &default_binding(&o)?,
        Variant::Plant,
    )?;
    let text = save_trace_csv(&trace);
    for line in text.lines().take(4) {
        println!("{line}");
    }
    let reloaded = load_trace_csv(&text)?;
    println!(
        "... {} samples, trace survives the round trip: {}\n",
        reloaded.len(),
        reloaded == trace
    );

    let traces = [("near_high.plant".to_string(), reloaded)]
        .into_iter()
        .collect();
    print!("{}", run_suite(&back, &traces).render_text());
    Ok(())
}
