//! Coverage reporting.
//!
//! Two independent kinds of coverage live here:
//!
//! * model coverage ([`CoverageSnapshot`]): distinct and executed counts of
//!   models, vertices, edges and requirements during a run, rendered as the
//!   live statistics block by [`format_stats`];
//! * code coverage ([`CoverageStore`]): client and server line-coverage
//!   events merged into cumulative and per-page percentages.
//!
//! It also owns the artifact formats: the run-log CSV (with an independent
//! fold back to a snapshot) and the NDJSON event and time-series streams.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{RunReport, StepRecord, Verdict};
use crate::generators::StepKind;
use crate::model::{ElementKey, ElementRef, Suite, VertexKey};
use crate::stop::CoverageState;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoverageSnapshot {
    pub models_reached: usize,
    pub models_total: usize,
    pub vertices_covered: usize,
    pub vertices_total: usize,
    pub vertices_executed: u64,
    pub edges_covered: usize,
    pub edges_total: usize,
    pub edges_executed: u64,
    pub requirements_covered: usize,
    pub requirements_total: usize,
    pub elapsed_s: f64,
}

impl CoverageSnapshot {
    pub fn from_state(suite: &Suite, cov: &CoverageState, elapsed_s: f64) -> Self {
        CoverageSnapshot {
            models_reached: models_reached(suite, cov.visited_vertices.iter().copied()),
            models_total: suite.models().len(),
            vertices_covered: cov.visited_vertices.len(),
            vertices_total: suite.vertex_count(),
            vertices_executed: cov.executed_vertex_count,
            edges_covered: cov.visited_edges.len(),
            edges_total: suite.edge_count(),
            edges_executed: cov.executed_edge_count,
            requirements_covered: cov.visited_requirements.len(),
            requirements_total: suite.requirements_universe().len(),
            elapsed_s,
        }
    }

    pub fn edge_pct(&self) -> f64 {
        ratio_pct(self.edges_covered as u64, self.edges_total as u64)
    }

    pub fn vertex_pct(&self) -> f64 {
        ratio_pct(self.vertices_covered as u64, self.vertices_total as u64)
    }

    pub fn requirement_pct(&self) -> f64 {
        ratio_pct(
            self.requirements_covered as u64,
            self.requirements_total as u64,
        )
    }
}

fn models_reached(suite: &Suite, vertices: impl Iterator<Item = VertexKey>) -> usize {
    vertices
        .map(|v| suite.model_of_vertex(v))
        .collect::<BTreeSet<_>>()
        .len()
}

fn ratio_pct(covered: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * covered as f64 / total as f64
    }
}

/// `covered/total` as a percentage with two decimals, rounded half-up.
pub fn format_pct(covered: u64, total: u64) -> String {
    if total == 0 {
        return "0.00%".to_string();
    }
    // hundredths of a percent, exact integer rounding
    let h = (covered * 20_000 + total) / (2 * total);
    format!("{}.{:02}%", h / 100, h % 100)
}

/// Whole seconds as `HH:MM:SS`.
pub fn format_elapsed(seconds: f64) -> String {
    let s = seconds.max(0.0).floor() as u64;
    format!("{:02}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60)
}

pub fn format_stats(s: &CoverageSnapshot) -> String {
    let ratio = |c: usize, t: usize| format!("{c}/{t} = {}", format_pct(c as u64, t as u64));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# of test models reached so far: {}",
        ratio(s.models_reached, s.models_total)
    );
    let _ = writeln!(
        out,
        "# of nodes covered so far: {}",
        ratio(s.vertices_covered, s.vertices_total)
    );
    let _ = writeln!(out, "# of nodes executed so far: {}", s.vertices_executed);
    let _ = writeln!(
        out,
        "# of edges covered so far: {}",
        ratio(s.edges_covered, s.edges_total)
    );
    let _ = writeln!(out, "# of edges executed so far: {}", s.edges_executed);
    let _ = writeln!(
        out,
        "# of requirements covered so far: {}",
        ratio(s.requirements_covered, s.requirements_total)
    );
    let _ = writeln!(out, "Time elapsed in MBT: {}", format_elapsed(s.elapsed_s));
    out
}

// Code coverage.

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Client,
    Server,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeCoverageEvent {
    #[serde(rename = "t")]
    pub timestamp_s: f64,
    pub scope: Scope,
    #[serde(rename = "source")]
    pub source_id: String,
    #[serde(rename = "page", default, skip_serializing_if = "Option::is_none")]
    pub page_id: Option<String>,
    #[serde(rename = "total")]
    pub total_lines: u32,
    #[serde(rename = "covered")]
    pub covered_lines: BTreeSet<u32>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoverageError {
    #[error("event for `{source_id}`: {message}")]
    InvalidEvent { source_id: String, message: String },
    #[error("source `{source_id}` was registered with {known} lines, event says {got}")]
    TotalConflict {
        source_id: String,
        known: u32,
        got: u32,
    },
    #[error("page `{0}` was never current")]
    UnknownPage(String),
    #[error("series `{series:?}` goes back in time at t={t}")]
    NonMonotone { series: Series, t: f64 },
    #[error("line {line}: {message}")]
    Stream { line: usize, message: String },
}

impl CodeCoverageEvent {
    pub fn validate(&self) -> Result<(), CoverageError> {
        let bad = |message: &str| CoverageError::InvalidEvent {
            source_id: self.source_id.clone(),
            message: message.to_string(),
        };
        if self.total_lines == 0 {
            return Err(bad("total line count must be positive"));
        }
        if !self.timestamp_s.is_finite() || self.timestamp_s < 0.0 {
            return Err(bad("timestamp must be a non-negative number"));
        }
        if self.covered_lines.first() == Some(&0)
            || self
                .covered_lines
                .last()
                .is_some_and(|&l| l > self.total_lines)
        {
            return Err(bad("covered line outside [1, total]"));
        }
        match (self.scope, &self.page_id) {
            (Scope::Client, None) => Err(bad("client events need a page")),
            (Scope::Server, Some(_)) => Err(bad("server events carry no page")),
            _ => Ok(()),
        }
    }
}

/// Parses the NDJSON code-coverage event stream; blank lines are skipped.
pub fn parse_events(ndjson: &str) -> Result<Vec<CodeCoverageEvent>, CoverageError> {
    let mut out = Vec::new();
    for (i, line) in ndjson.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: CodeCoverageEvent =
            serde_json::from_str(line).map_err(|e| CoverageError::Stream {
                line: i + 1,
                message: e.to_string(),
            })?;
        event.validate().map_err(|e| CoverageError::Stream {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(event);
    }
    Ok(out)
}

pub fn events_to_ndjson(events: &[CodeCoverageEvent]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("event serialization cannot fail") + "\n")
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct SourceLines {
    total: u32,
    covered: BTreeSet<u32>,
}

/// Running line-coverage unions per source plus the current page interval.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageStore {
    sources: BTreeMap<(Scope, String), SourceLines>,
    pages: BTreeMap<String, BTreeMap<String, SourceLines>>,
    current_page: Option<String>,
}

impl CoverageStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current_page(&self) -> Option<&str> {
        self.current_page.as_deref()
    }

    /// Makes `page` current and restarts its interval.
    pub fn enter_page(&mut self, page: &str) {
        self.current_page = Some(page.to_string());
        self.pages.insert(page.to_string(), BTreeMap::new());
    }

    /// Number of distinct sources seen in `scope`.
    pub fn source_count(&self, scope: Scope) -> usize {
        self.sources.keys().filter(|(s, _)| *s == scope).count()
    }

    pub fn ingest(&mut self, event: &CodeCoverageEvent) -> Result<(), CoverageError> {
        event.validate()?;
        let key = (event.scope, event.source_id.clone());
        if let Some(known) = self.sources.get(&key) {
            if known.total != event.total_lines {
                return Err(CoverageError::TotalConflict {
                    source_id: event.source_id.clone(),
                    known: known.total,
                    got: event.total_lines,
                });
            }
        }
        let merge = |entry: &mut SourceLines| {
            entry.total = event.total_lines;
            entry.covered.extend(event.covered_lines.iter().copied());
        };
        merge(self.sources.entry(key).or_default());
        if let (Scope::Client, Some(page)) = (event.scope, &event.page_id) {
            if self.current_page.as_deref() != Some(page.as_str()) {
                self.enter_page(page);
            }
            let interval = self.pages.get_mut(page).expect("page entered above");
            merge(interval.entry(event.source_id.clone()).or_default());
        }
        Ok(())
    }

    /// Covered lines over total lines of every source seen so far in `scope`.
    pub fn cumulative_pct(&self, scope: Scope) -> f64 {
        let (covered, total) = self
            .sources
            .iter()
            .filter(|((s, _), _)| *s == scope)
            .fold((0u64, 0u64), |(c, t), (_, src)| {
                (c + src.covered.len() as u64, t + u64::from(src.total))
            });
        ratio_pct(covered, total)
    }

    /// Coverage accumulated since `page` last became current, over the
    /// sources it referenced in that interval.
    pub fn per_page_pct(&self, page: &str) -> Result<f64, CoverageError> {
        let interval = self
            .pages
            .get(page)
            .ok_or_else(|| CoverageError::UnknownPage(page.to_string()))?;
        let (covered, total) = interval.values().fold((0u64, 0u64), |(c, t), src| {
            (c + src.covered.len() as u64, t + u64::from(src.total))
        });
        Ok(ratio_pct(covered, total))
    }
}

pub fn ingest_code_event(
    store: &mut CoverageStore,
    event: &CodeCoverageEvent,
) -> Result<(), CoverageError> {
    store.ingest(event)
}

pub fn cumulative_pct(store: &CoverageStore, scope: Scope) -> f64 {
    store.cumulative_pct(scope)
}

pub fn per_page_pct(store: &CoverageStore, page: &str) -> Result<f64, CoverageError> {
    store.per_page_pct(page)
}

// Time series.

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    CumulativeClient,
    CurrentPageClient,
    CumulativeServer,
    ModelEdgePct,
    ModelVertexPct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSeriesPoint {
    pub t: f64,
    pub series: Series,
    pub value: f64,
}

/// Replays events through a fresh store, recording the affected series
/// after each one.
pub fn series_from_events(
    events: &[CodeCoverageEvent],
) -> Result<Vec<TimeSeriesPoint>, CoverageError> {
    let mut store = CoverageStore::new();
    let mut out = Vec::new();
    for e in events {
        store.ingest(e)?;
        let mut push = |series, value| {
            out.push(TimeSeriesPoint {
                t: e.timestamp_s,
                series,
                value,
            })
        };
        match e.scope {
            Scope::Client => {
                push(
                    Series::CumulativeClient,
                    store.cumulative_pct(Scope::Client),
                );
                let page = e.page_id.as_deref().expect("validated client event");
                push(Series::CurrentPageClient, store.per_page_pct(page)?);
            }
            Scope::Server => push(
                Series::CumulativeServer,
                store.cumulative_pct(Scope::Server),
            ),
        }
    }
    Ok(out)
}

pub fn series_from_snapshots(snapshots: &[CoverageSnapshot]) -> Vec<TimeSeriesPoint> {
    snapshots
        .iter()
        .flat_map(|s| {
            [
                TimeSeriesPoint {
                    t: s.elapsed_s,
                    series: Series::ModelEdgePct,
                    value: s.edge_pct(),
                },
                TimeSeriesPoint {
                    t: s.elapsed_s,
                    series: Series::ModelVertexPct,
                    value: s.vertex_pct(),
                },
            ]
        })
        .collect()
}

/// One JSON object per line. Timestamps must not decrease within a series.
pub fn emit_series(points: &[TimeSeriesPoint]) -> Result<String, CoverageError> {
    let mut last: BTreeMap<Series, f64> = BTreeMap::new();
    let mut out = String::new();
    for p in points {
        if let Some(&prev) = last.get(&p.series) {
            if p.t < prev {
                return Err(CoverageError::NonMonotone {
                    series: p.series,
                    t: p.t,
                });
            }
        }
        last.insert(p.series, p.t);
        out.push_str(&serde_json::to_string(p).expect("point serialization cannot fail"));
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_series(ndjson: &str) -> Result<Vec<TimeSeriesPoint>, CoverageError> {
    ndjson
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CoverageError::Stream {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

// Run log.

pub const RUN_LOG_HEADER: [&str; 8] = [
    "seq", "offset_s", "kind", "model", "element", "name", "verdict", "context",
];

#[derive(Debug, Error)]
pub enum RunLogError {
    #[error("run log: {0}")]
    Csv(#[from] csv::Error),
    #[error("run log header mismatch: {0:?}")]
    Header(Vec<String>),
    #[error("run log row {row}: {message}")]
    Row { row: usize, message: String },
}

/// Parsed run-log row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRow {
    pub seq: u64,
    pub offset_us: u64,
    pub kind: StepKind,
    pub model: String,
    pub element: String,
    pub name: String,
    pub verdict: String,
    pub context: String,
}

impl LogRow {
    /// Fault id from a `fail:<id>` verdict cell.
    pub fn fault_id(&self) -> Option<&str> {
        self.verdict.strip_prefix("fail:")
    }

    pub fn failed(&self) -> bool {
        self.verdict == "fail" || self.fault_id().is_some()
    }
}

pub fn format_offset(us: u64) -> String {
    format!("{}.{:06}", us / 1_000_000, us % 1_000_000)
}

fn parse_offset(text: &str) -> Option<u64> {
    let (secs, frac) = text.split_once('.')?;
    if frac.len() != 6 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some(secs.parse::<u64>().ok()? * 1_000_000 + frac.parse::<u64>().ok()?)
}

pub fn verdict_cell(record: &StepRecord) -> String {
    match (record.verdict, &record.fault_id) {
        (None, _) => String::new(),
        (Some(Verdict::Pass), _) => "pass".into(),
        (Some(Verdict::Fail), None) => "fail".into(),
        (Some(Verdict::Fail), Some(id)) => format!("fail:{id}"),
    }
}

pub fn export_run_log(report: &RunReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RUN_LOG_HEADER).expect("in-memory write");
    for r in &report.steps {
        w.write_record([
            r.seq.to_string(),
            format_offset(r.offset_us),
            r.step.kind.to_string(),
            r.step.model_id.clone(),
            r.step.element_id.clone(),
            r.step.name.clone(),
            verdict_cell(r),
            r.context.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn parse_run_log(text: &str) -> Result<Vec<LogRow>, RunLogError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != RUN_LOG_HEADER {
        return Err(RunLogError::Header(header));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let bad = |message: &str| RunLogError::Row {
            row,
            message: message.to_string(),
        };
        let seq: u64 = rec[0].parse().map_err(|_| bad("bad sequence number"))?;
        if seq != row as u64 {
            return Err(bad("sequence numbers must be contiguous from 1"));
        }
        let kind = match &rec[2] {
            "edge" => StepKind::Edge,
            "vertex" => StepKind::Vertex,
            _ => return Err(bad("kind must be `edge` or `vertex`")),
        };
        rows.push(LogRow {
            seq,
            offset_us: parse_offset(&rec[1]).ok_or_else(|| bad("bad offset"))?,
            kind,
            model: rec[3].to_string(),
            element: rec[4].to_string(),
            name: rec[5].to_string(),
            verdict: rec[6].to_string(),
            context: rec[7].to_string(),
        });
    }
    Ok(rows)
}

/// Recounts model coverage from log rows alone.
///
/// A shared-state jump leaves no row; it shows up as an edge whose source is
/// not the preceding vertex, and the landing vertex is counted there.
pub fn fold_run_log(rows: &[LogRow], suite: &Suite) -> Result<CoverageSnapshot, RunLogError> {
    let mut vertices = BTreeSet::new();
    let mut edges = BTreeSet::new();
    let mut requirements = BTreeSet::new();
    let (mut vertex_runs, mut edge_runs) = (0u64, 0u64);
    let mut here: Option<VertexKey> = None;
    let mut visit = |v: VertexKey, vertices: &mut BTreeSet<VertexKey>, runs: &mut u64| {
        vertices.insert(v);
        requirements.extend(suite.vertex(v).requirements.iter().cloned());
        *runs += 1;
    };
    for row in rows {
        let bad = |message: String| RunLogError::Row {
            row: row.seq as usize,
            message,
        };
        let key = suite
            .resolve(&ElementRef::new(&row.model, &row.element))
            .ok_or_else(|| bad(format!("unknown element {}/{}", row.model, row.element)))?;
        match (row.kind, key) {
            (StepKind::Vertex, ElementKey::Vertex(v)) => {
                if suite.vertex(v).name != row.name {
                    return Err(bad("name does not match the suite".into()));
                }
                visit(v, &mut vertices, &mut vertex_runs);
                here = Some(v);
            }
            (StepKind::Edge, ElementKey::Edge(e)) => {
                if suite.edge(e).name != row.name {
                    return Err(bad("name does not match the suite".into()));
                }
                let source = suite.edge_source(e);
                match here {
                    Some(v) if v == source => {}
                    Some(v) if suite.shared_peers(v).contains(&source) => {
                        visit(source, &mut vertices, &mut vertex_runs);
                    }
                    _ => return Err(bad("edge does not leave the current vertex".into())),
                }
                edges.insert(e);
                edge_runs += 1;
                here = None;
            }
            _ => return Err(bad("kind does not match the element".into())),
        }
    }
    Ok(CoverageSnapshot {
        models_reached: models_reached(suite, vertices.iter().copied()),
        models_total: suite.models().len(),
        vertices_covered: vertices.len(),
        vertices_total: suite.vertex_count(),
        vertices_executed: vertex_runs,
        edges_covered: edges.len(),
        edges_total: suite.edge_count(),
        edges_executed: edge_runs,
        requirements_covered: requirements.len(),
        requirements_total: suite.requirements_universe().len(),
        elapsed_s: rows.last().map_or(0.0, |r| r.offset_us as f64 / 1e6),
    })
}
