use std::time::Duration;

use mbt_core::engine::{run_online_with_clock, FailurePolicy, ManualClock, RunConfig};
use mbt_core::sim::{synthetic, SyntheticConfig};
use mbt_core::{load_sut_spec, parse_stop_spec, parse_suite, GeneratorKind, Simulator};

#[test]
fn same_actions_give_same_trajectory_and_events() {
    let spec = load_sut_spec(include_str!("../data/demo_sut_faulty.json")).unwrap();
    let actions = [
        "e_invalid_login",
        "e_valid_login",
        "e_open_projects_tab",
        "e_logout",
        "e_valid_login",
        "e_logout",
    ];
    let trace = || {
        let mut sim = Simulator::new(
            spec.clone(),
            Box::new(ManualClock::new(Duration::from_millis(3))),
        );
        let mut pages = Vec::new();
        for a in actions {
            let out = sim.sim_execute_edge(a);
            let check = sim.sim_verify_vertex("n_verify_in_dashboard");
            pages.push((out, check, sim.current_page().to_string()));
        }
        (pages, sim.take_events())
    };
    assert_eq!(trace(), trace());
}

#[test]
fn demo_flow_runs_clean() {
    let suite = parse_suite(include_str!("../data/demo_suite.json")).unwrap();
    let spec = load_sut_spec(include_str!("../data/demo_sut.json")).unwrap();
    for seed in 0..20 {
        let clock = ManualClock::new(Duration::from_millis(1));
        let mut sim = Simulator::new(spec.clone(), Box::new(clock.clone()));
        let report = run_online_with_clock(
            &suite,
            &GeneratorKind::WeightedRandom,
            &parse_stop_spec("edge_coverage(100)").unwrap(),
            &mut sim,
            &RunConfig::with_seed(seed),
            &clock,
        )
        .unwrap();
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        // every client event names the page the simulator was on
        assert!(sim
            .events()
            .iter()
            .all(|e| e.page_id.as_deref().is_none_or(|p| spec.page(p).is_some())));
    }
}

#[test]
fn synthetic_runs_are_reproducible() {
    let cfg = SyntheticConfig {
        models: 4,
        vertices: 20,
        edges: 30,
        faults: 4,
        seed: 9,
    };
    let run = || {
        let (suite, spec) = synthetic(&cfg);
        let clock = ManualClock::new(Duration::from_millis(2));
        let mut sim = Simulator::new(spec, Box::new(clock.clone()));
        let rc = RunConfig {
            seed: 3,
            failure_policy: FailurePolicy::Continue,
            ..RunConfig::default()
        };
        let report = run_online_with_clock(
            &suite,
            &GeneratorKind::QuickRandom,
            &parse_stop_spec("edge_coverage(100)").unwrap(),
            &mut sim,
            &rc,
            &clock,
        )
        .unwrap();
        (report.steps, report.failures, sim.take_events())
    };
    assert_eq!(run(), run());
}
