//! Instantiates the never and response boilerplates by hand, then parses
//! the bundled requirements file and prints it back in explicit form.
//!
//! ```bash
//! cargo run --example boilerplates
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use reqcase::expr::parse_expr;
use reqcase::rsl::{instantiate_boilerplate, parse_rsl, print_rsl, Boilerplate, SlotValue};
use reqcase::wps_sim::wps_ontology;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let o = wps_ontology();

    let mut bindings = BTreeMap::new();
    bindings.insert(
        "trigger".to_string(),
        SlotValue::Formula(parse_expr("{System.normal system operation}")?),
    );
    bindings.insert(
        "sys".to_string(),
        SlotValue::Concept("Feedwater Tank".into()),
    );
    bindings.insert(
        "bad".to_string(),
        SlotValue::Formula(parse_expr("{Feedwater Tank.overflows}")?),
    );
    let r = instantiate_boilerplate(&Boilerplate::b1(), "R1_2", 1, &bindings, &o)?;
    println!("{}", print_rsl(&[r]));

    let mut bindings = BTreeMap::new();
    bindings.insert(
        "trigger".to_string(),
        SlotValue::Formula(parse_expr(
            "{Feedwater Tank.overflows} | {Feedwater Tank.underflows}",
        )?),
    );
    bindings.insert(
        "sys".to_string(),
        SlotValue::Concept("FeedWater Alarm".into()),
    );
    bindings.insert(
        "response".to_string(),
        SlotValue::Formula(parse_expr("{FeedWater Alarm.raised}")?),
    );
    let r = instantiate_boilerplate(&Boilerplate::b2(), "R2", 1, &bindings, &o)?;
    println!("{}", print_rsl(&[r]));

    bindings.insert(
        "response".to_string(),
        SlotValue::Formula(parse_expr("{FeedWater Alarm.silenced}")?),
    );
    if let Err(e) = instantiate_boilerplate(&Boilerplate::b2(), "R2", 1, &bindings, &o) {
        println!("rejected: {e}\n");
    }

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wps/requirements.rsl");
    let reqs = parse_rsl(&std::fs::read_to_string(path)?, &o)?;
    println!("# {} requirements from the bundled project", reqs.len());
    print!("{}", print_rsl(&reqs));
    Ok(())
}
