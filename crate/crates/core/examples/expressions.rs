//! Parses a few condition expressions, prints their canonical form and
//! evaluates one of them over every valuation of its atoms.
//!
//! ```bash
//! cargo run --example expressions
//! ```

use std::collections::BTreeMap;

use reqcase::expr::parse_expr;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sources = [
        "!{Feedwater Tank.underflows}",
        "{Feedwater Tank.overflows} | {Feedwater Tank.underflows}",
        "{System.normal system operation} & !{FeedWater Alarm.raised} | false",
        "!!{A.x} & ({A.y} | true)",
    ];
    for src in sources {
        let e = parse_expr(src)?;
        println!("{src:<70} => {e}");
    }

    let e = parse_expr("{Tank.high} & !{Alarm.raised} | {Tank.low} & !{Alarm.raised}")?;
    let atoms: Vec<_> = e.atoms().into_iter().collect();
    println!("\ntruth table for {e}");
    for bits in 0..1u32 << atoms.len() {
        let valuation: BTreeMap<_, _> = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), bits >> i & 1 == 1))
            .collect();
        let row: Vec<String> = valuation
            .iter()
            .map(|(a, v)| format!("{a}={}", u8::from(*v)))
            .collect();
        println!("  {}  -> {}", row.join(" "), e.eval(&valuation)?);
    }

    match parse_expr("{Tank.high} &\n  ({Alarm raised}") {
        Ok(_) => unreachable!(),
        Err(err) => println!("\nerror reporting: {err}"),
    }
    Ok(())
}
