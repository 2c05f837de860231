//! Online run against the simulated login/dashboard app with one injected
//! fault, then the run log folded back into the statistics block.

use std::fmt::Write;
use std::time::Duration;

use mbt_core::coverage::{export_run_log, fold_run_log, parse_run_log};
use mbt_core::engine::{run_online_with_clock, FailurePolicy, ManualClock};
use mbt_core::{
    format_stats, load_sut_spec, parse_stop_spec, parse_suite, GeneratorKind, RunConfig, Simulator,
};

const DEMO: &str = include_str!("../data/demo_suite.json");
const FAULTY: &str = include_str!("../data/demo_sut_faulty.json");

pub fn run() -> String {
    let mut out = String::new();
    let suite = parse_suite(DEMO).unwrap();
    // each clock read advances simulated time by 1.5 s
    let clock = ManualClock::new(Duration::from_millis(1500));
    let mut sim = Simulator::new(load_sut_spec(FAULTY).unwrap(), Box::new(clock.clone()));
    let cfg = RunConfig {
        seed: 3,
        failure_policy: FailurePolicy::Continue,
        ..RunConfig::default()
    };
    let stop = parse_stop_spec("edge_coverage(100)").unwrap();
    let report = run_online_with_clock(
        &suite,
        &GeneratorKind::Random,
        &stop,
        &mut sim,
        &cfg,
        &clock,
    )
    .unwrap();

    let _ = writeln!(
        out,
        "verdict: {:?}, {} steps, {} snapshots",
        report.verdict,
        report.steps.len(),
        report.snapshots.len()
    );
    for f in &report.failures {
        let _ = writeln!(
            out,
            "  step {} [{}]: {}",
            f.seq,
            f.fault_id.as_deref().unwrap_or("-"),
            f.message
        );
    }
    let csv = export_run_log(&report);
    let _ = writeln!(out, "run log head:");
    for line in csv.lines().take(4) {
        let _ = writeln!(out, "  {line}");
    }
    let summary = format_stats(&report.final_coverage);
    out.push_str(&summary);
    let folded = format_stats(&fold_run_log(&parse_run_log(&csv).unwrap(), &suite).unwrap());
    let _ = writeln!(out, "fold matches: {}", folded == summary);
    out
}

fn main() {
    print!("{}", run());
}
