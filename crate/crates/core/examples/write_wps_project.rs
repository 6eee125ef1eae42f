//! Regenerates the ontology and parameter files of the bundled WPS project
//! under `data/wps/`.
//!
//! ```bash
//! cargo run --example write_wps_project
//! ```

use std::path::Path;

use reqcase::ontology::save_ontology;
use reqcase::wps_sim::{design_ontology, wps_ontology, PlantParams};

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wps");
    std::fs::write(dir.join("stage1.onto.json"), save_ontology(&wps_ontology()))?;
    std::fs::write(
        dir.join("design.onto.json"),
        save_ontology(&design_ontology()),
    )?;
    let params = serde_json::to_string_pretty(&PlantParams::default()).expect("params serialize");
    std::fs::write(dir.join("params.json"), params + "\n")?;
    println!("wrote {}", dir.display());
    Ok(())
}
