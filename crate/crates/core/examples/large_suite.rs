//! A generated suite of 18 models, 177 vertices and 260 edges run against
//! a matching simulated app with 11 injected faults.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::time::Duration;

use mbt_core::engine::{run_online_with_clock, FailurePolicy, ManualClock};
use mbt_core::sim::{synthetic, SyntheticConfig};
use mbt_core::{format_stats, parse_stop_spec, GeneratorKind, RunConfig, Simulator};

pub fn run() -> String {
    let mut out = String::new();
    let (suite, spec) = synthetic(&SyntheticConfig {
        models: 18,
        vertices: 177,
        edges: 260,
        faults: 11,
        seed: 2024,
    });
    let injected: BTreeSet<String> = spec.faults.iter().map(|f| f.id.clone()).collect();
    let _ = writeln!(
        out,
        "{} pages, {} faults injected",
        spec.pages.len(),
        injected.len()
    );

    let stop = parse_stop_spec("edge_coverage(100)").unwrap();
    let cfg = RunConfig {
        seed: 7,
        failure_policy: FailurePolicy::Continue,
        snapshot_interval_s: 60.0,
        ..RunConfig::default()
    };
    for generator in [GeneratorKind::QuickRandom, GeneratorKind::Random] {
        let clock = ManualClock::new(Duration::from_millis(250));
        let mut sim = Simulator::new(spec.clone(), Box::new(clock.clone()));
        let report =
            run_online_with_clock(&suite, &generator, &stop, &mut sim, &cfg, &clock).unwrap();
        let found: BTreeSet<String> = report
            .failures
            .iter()
            .filter_map(|f| f.fault_id.clone())
            .collect();
        let _ = writeln!(
            out,
            "== {generator}: {} failures, {}/{} faults found",
            report.failures.len(),
            found.len(),
            injected.len()
        );
        out.push_str(&format_stats(&report.final_coverage));
    }
    out
}

fn main() {
    print!("{}", run());
}
