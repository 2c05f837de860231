//! How each stop condition, alone or combined, bounds a walk.

use std::fmt::Write;

use mbt_core::{generate_offline, parse_stop_spec, parse_suite, GeneratorKind, StepKind};

const DEMO: &str = include_str!("../data/demo_suite.json");

pub fn run() -> String {
    let mut out = String::new();
    let suite = parse_suite(DEMO).unwrap();
    let specs = [
        "length(0)",
        "length(4)",
        "edge_coverage(60)",
        "vertex_coverage(100)",
        "requirement_coverage(50)",
        "dependency_edge_coverage(80)",
        "reached_vertex(dashboard/d_projects)",
        "reached_edge(login/l_out)",
        "edge_coverage(100) and length(20)",
        "reached_edge(login/l_out) or length(30)",
    ];
    for text in specs {
        let stop = parse_stop_spec(text).unwrap();
        let steps = generate_offline(&suite, &GeneratorKind::Random, &stop, 11).unwrap();
        let edges = steps.iter().filter(|s| s.kind == StepKind::Edge).count();
        let last = steps.last().map(|s| s.name.as_str()).unwrap_or("-");
        let _ = writeln!(
            out,
            "{:<42} {edges:>3} edges, ends at {last}",
            stop.to_string()
        );
    }
    for bad in ["edge_coverage(150)", "length(4) or", "reach(login/l_start)"] {
        let _ = writeln!(
            out,
            "{bad:<42} error: {}",
            parse_stop_spec(bad).unwrap_err()
        );
    }
    out
}

fn main() {
    print!("{}", run());
}
