//! Load a suite, list what it contains and print validator diagnostics.

use std::fmt::Write;

use mbt_core::model::{parse_suite, shared_group, validate_suite, Diagnostic};

const DEMO: &str = include_str!("../data/demo_suite.json");

pub fn run() -> String {
    let mut out = String::new();
    let suite = parse_suite(DEMO).expect("bundled suite parses");
    for m in suite.models() {
        let _ = writeln!(
            out,
            "model {} ({}): {} vertices, {} edges",
            m.id,
            m.name,
            m.vertices.len(),
            m.edges.len()
        );
    }
    let _ = writeln!(out, "requirements: {:?}", suite.requirements_universe());
    for (label, _) in suite.shared_labels() {
        let members: Vec<String> = shared_group(&suite, label)
            .iter()
            .map(ToString::to_string)
            .collect();
        let _ = writeln!(out, "shared {label}: {}", members.join(", "));
    }
    let diags = validate_suite(&suite);
    let _ = writeln!(out, "diagnostics: {}", diags.len());
    for d in &diags {
        let _ = writeln!(out, "  {d}");
    }

    // a dangling endpoint is reported with its location
    let broken = DEMO.replace(r#""target": "d_projects""#, r#""target": "d_settings""#);
    match parse_suite(&broken) {
        Ok(_) => out.push_str("broken suite unexpectedly parsed\n"),
        Err(e) => {
            let _ = writeln!(out, "{}", Diagnostic::from_error(&e));
        }
    }
    out
}

fn main() {
    print!("{}", run());
}
