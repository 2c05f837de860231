//! Cumulative and per-page line coverage from client and server events.

use std::collections::BTreeSet;
use std::fmt::Write;

use mbt_core::coverage::{emit_series, series_from_events, CodeCoverageEvent, Scope};
use mbt_core::CoverageStore;

fn client(
    t: f64,
    page: &str,
    source: &str,
    total: u32,
    lines: impl IntoIterator<Item = u32>,
) -> CodeCoverageEvent {
    CodeCoverageEvent {
        timestamp_s: t,
        scope: Scope::Client,
        source_id: source.into(),
        page_id: Some(page.into()),
        total_lines: total,
        covered_lines: lines.into_iter().collect::<BTreeSet<_>>(),
    }
}

pub fn run() -> String {
    let mut out = String::new();
    let events = vec![
        client(0.0, "login", "login.js", 100, 1..=50),
        // a new page pulls in a large script seen for the first time
        client(5.0, "dashboard", "vendor.js", 100, []),
        client(10.0, "dashboard", "vendor.js", 100, 1..=30),
        CodeCoverageEvent {
            timestamp_s: 10.0,
            scope: Scope::Server,
            source_id: "AuthService.java".into(),
            page_id: None,
            total_lines: 200,
            covered_lines: (1..=40).collect(),
        },
        client(15.0, "login", "login.js", 100, 40..=70),
    ];
    let mut store = CoverageStore::new();
    for e in &events {
        store.ingest(e).unwrap();
        let page = store.current_page().unwrap_or("-").to_string();
        let _ = writeln!(
            out,
            "t={:>4} {:?} {:<16} cumulative client {:>6.2}%  page {page:<9} {:>6.2}%  server {:>6.2}%",
            e.timestamp_s,
            e.scope,
            e.source_id,
            store.cumulative_pct(Scope::Client),
            store.per_page_pct(&page).unwrap(),
            store.cumulative_pct(Scope::Server),
        );
    }
    out.push_str(&emit_series(&series_from_events(&events).unwrap()).unwrap());
    out
}

fn main() {
    print!("{}", run());
}
