//! Builds the stage-1 requirements ontology, refines it with a
//! model-view-controller design ontology and checks which concepts used by a
//! requirement are traced across the stages.
//!
//! ```bash
//! cargo run --example ontology_refinement
//! ```

use std::collections::BTreeSet;

use reqcase::expr::parse_expr;
use reqcase::ontology::{Ontology, RefinementLink, HAS_STATE};
use reqcase::wps_sim::{design_links, design_ontology, minimal_ontology};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = minimal_ontology();
    println!(
        "stage {}: {} vertices, {} arcs",
        base.stage_version,
        base.vertices.len(),
        base.arcs.len()
    );
    for a in base.induced_atoms()? {
        println!("  atom {a}");
    }

    let design = design_ontology();
    let merged = Ontology::refine(&base, &design, &design_links())?;
    println!(
        "\nstage {}: {} vertices, {} arcs, violations: {}",
        merged.stage_version,
        merged.vertices.len(),
        merged.arcs.len(),
        merged.validate().len()
    );
    for a in merged.arcs.iter().filter(|a| a.labels.contains("refines")) {
        println!("  {} refines {}", a.source, a.target);
    }

    let used =
        parse_expr("{System.normal system operation} & !{Feedwater Tank.underflows}")?.atoms();
    println!(
        "\nuntraced with all links: {:?}",
        merged.check_traceability(&used)?
    );
    let partial: Vec<RefinementLink> = design_links()
        .into_iter()
        .filter(|l| l.base != "Feedwater Tank")
        .collect();
    let merged = Ontology::refine(&base, &design, &partial)?;
    println!(
        "untraced without the tank link: {:?}",
        merged.check_traceability(&used)?
    );

    // A has-state arc whose target is not a state vertex breaks validation.
    let mut broken = base.clone();
    broken.add_arc(
        "System/Feedwater Tank",
        "System",
        "Feedwater Tank",
        [HAS_STATE],
    );
    println!("\nmutated ontology:");
    for v in broken.validate() {
        println!("  {v}");
    }
    let atoms: BTreeSet<_> = merged.induced_atoms()?;
    println!("\nstage-2 atom count: {}", atoms.len());
    Ok(())
}
