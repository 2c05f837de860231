//! The four generators on the bundled suite, plus weighted edge frequencies.

use std::collections::BTreeMap;
use std::fmt::Write;

use mbt_core::generators::{next_step_weighted, WalkState};
use mbt_core::model::ElementRef;
use mbt_core::{generate_offline, parse_stop_spec, parse_suite, Context, GeneratorKind, StepKind};

const DEMO: &str = include_str!("../data/demo_suite.json");

pub fn run() -> String {
    let mut out = String::new();
    let suite = parse_suite(DEMO).unwrap();
    let full = parse_stop_spec("edge_coverage(100)").unwrap();
    for g in [
        GeneratorKind::Random,
        GeneratorKind::WeightedRandom,
        GeneratorKind::QuickRandom,
    ] {
        let lengths: Vec<usize> = (0..5)
            .map(|seed| {
                let steps = generate_offline(&suite, &g, &full, seed).unwrap();
                steps.iter().filter(|s| s.kind == StepKind::Edge).count()
            })
            .collect();
        let _ = writeln!(
            out,
            "{:<12} edges to full coverage, seeds 0..5: {lengths:?}",
            g.to_string()
        );
    }

    let astar = GeneratorKind::AStar(ElementRef::new("dashboard", "d_projects"));
    let target = parse_stop_spec("reached_vertex(dashboard/d_projects)").unwrap();
    let _ = writeln!(out, "{astar}:");
    for step in generate_offline(&suite, &astar, &target, 0).unwrap() {
        let _ = writeln!(out, "  {step}");
    }

    // d_home has one weighted out-edge (0.7) and nothing else to pick from,
    // so sample a fan built in code instead
    let fan = parse_suite(
        r#"{"entry": {"model": "f", "vertex": "hub"},
            "models": [{"id": "f", "name": "fan",
              "vertices": [{"id": "hub", "name": "n_hub"}, {"id": "x", "name": "n_x"}, {"id": "y", "name": "n_y"}],
              "edges": [{"id": "hx", "name": "e_x", "source": "hub", "target": "x", "weight": 0.9},
                        {"id": "hy", "name": "e_y", "source": "hub", "target": "y", "weight": 0.1}]}]}"#,
    )
    .unwrap();
    let mut state = WalkState::new(fan.entry(), Context::new(), 42);
    let mut counts = BTreeMap::new();
    for _ in 0..10_000 {
        let e = next_step_weighted(&fan, &mut state).unwrap();
        *counts.entry(fan.edge(e).name.clone()).or_insert(0) += 1;
    }
    let _ = writeln!(out, "weighted draws: {counts:?}");
    out
}

fn main() {
    print!("{}", run());
}
