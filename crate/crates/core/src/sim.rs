//! Simulated web application used as the adapter in end-to-end runs.
//!
//! Pages bind action names to transitions and list the vertex names that
//! verify on them. Visiting a page emits client line-coverage events for its
//! scripts; a transition emits server events for the code it exercises.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::coverage::{CodeCoverageEvent, Scope};
use crate::engine::{Adapter, Clock, Outcome};
use crate::generators::walk_rng;
use crate::guard::Context;
use crate::model::{parse_suite, Suite};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSet {
    pub source: String,
    pub total: u32,
    pub lines: BTreeSet<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct TransitionEffect {
    pub next_page: String,
    #[serde(default)]
    pub server: Vec<LineSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Page {
    pub id: String,
    #[serde(default)]
    pub elements: BTreeMap<String, TransitionEffect>,
    #[serde(default)]
    pub verifications: BTreeSet<String>,
    #[serde(default)]
    pub client_sources: Vec<LineSet>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultBehavior {
    /// The bound action lands on this page instead of its declared target.
    WrongPage(String),
    /// Verifying the bound vertex name always fails.
    VerificationFail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub id: String,
    pub element: String,
    pub behavior: FaultBehavior,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct SutSpec {
    pub initial_page: String,
    pub pages: Vec<Page>,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
}

impl SutSpec {
    pub fn page(&self, id: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialization cannot fail")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SutSpecError {
    #[error("malformed SUT spec: {0}")]
    Malformed(String),
    #[error("duplicate page id `{0}`")]
    DuplicatePage(String),
    #[error("duplicate fault id `{0}`")]
    DuplicateFault(String),
    #[error("{context} refers to unknown page `{page}`")]
    DanglingPage { context: String, page: String },
    #[error("source `{source_id}` line {line} outside [1, {total}]")]
    LineOutOfRange {
        source_id: String,
        line: u32,
        total: u32,
    },
    #[error("source `{source_id}` declared with {first} and {second} lines")]
    TotalConflict {
        source_id: String,
        first: u32,
        second: u32,
    },
    #[error("fault `{fault}` is bound to unknown element `{element}`")]
    UnknownFaultElement { fault: String, element: String },
    #[error("element `{0}` has more than one fault")]
    FaultConflict(String),
}

pub fn load_sut_spec(document: &str) -> Result<SutSpec, SutSpecError> {
    let spec: SutSpec =
        serde_json::from_str(document).map_err(|e| SutSpecError::Malformed(e.to_string()))?;
    check_spec(&spec)?;
    Ok(spec)
}

fn check_spec(spec: &SutSpec) -> Result<(), SutSpecError> {
    let mut ids = BTreeSet::new();
    for p in &spec.pages {
        if !ids.insert(p.id.as_str()) {
            return Err(SutSpecError::DuplicatePage(p.id.clone()));
        }
    }
    let dangling = |context: String, page: &str| {
        if ids.contains(page) {
            Ok(())
        } else {
            Err(SutSpecError::DanglingPage {
                context,
                page: page.to_string(),
            })
        }
    };
    dangling("initialPage".into(), &spec.initial_page)?;

    let mut totals: BTreeMap<(Scope, String), u32> = BTreeMap::new();
    let mut check_lines = |scope: Scope, set: &LineSet| -> Result<(), SutSpecError> {
        if set.total == 0 {
            return Err(SutSpecError::LineOutOfRange {
                source_id: set.source.clone(),
                line: 0,
                total: 0,
            });
        }
        if let Some(&bad) = set.lines.iter().find(|&&l| l == 0 || l > set.total) {
            return Err(SutSpecError::LineOutOfRange {
                source_id: set.source.clone(),
                line: bad,
                total: set.total,
            });
        }
        // the event store rejects a source whose size changes
        let known = *totals
            .entry((scope, set.source.clone()))
            .or_insert(set.total);
        if known != set.total {
            return Err(SutSpecError::TotalConflict {
                source_id: set.source.clone(),
                first: known,
                second: set.total,
            });
        }
        Ok(())
    };
    for p in &spec.pages {
        for (name, effect) in &p.elements {
            dangling(
                format!("element `{name}` on page `{}`", p.id),
                &effect.next_page,
            )?;
            effect
                .server
                .iter()
                .try_for_each(|s| check_lines(Scope::Server, s))?;
        }
        p.client_sources
            .iter()
            .try_for_each(|s| check_lines(Scope::Client, s))?;
    }

    let mut fault_ids = BTreeSet::new();
    let mut bound = BTreeSet::new();
    for f in &spec.faults {
        if !fault_ids.insert(f.id.as_str()) {
            return Err(SutSpecError::DuplicateFault(f.id.clone()));
        }
        let known = match &f.behavior {
            FaultBehavior::WrongPage(page) => {
                dangling(format!("fault `{}`", f.id), page)?;
                spec.pages
                    .iter()
                    .any(|p| p.elements.contains_key(&f.element))
            }
            FaultBehavior::VerificationFail => spec
                .pages
                .iter()
                .any(|p| p.verifications.contains(&f.element)),
        };
        if !known {
            return Err(SutSpecError::UnknownFaultElement {
                fault: f.id.clone(),
                element: f.element.clone(),
            });
        }
        if !bound.insert(f.element.as_str()) {
            return Err(SutSpecError::FaultConflict(f.element.clone()));
        }
    }
    Ok(())
}

/// Deterministic page machine. Implements [`Adapter`].
///
/// After a wrong-page fault the next failing verification carries the
/// fault id; the simulator then moves to the first page that verifies the
/// expected name so the rest of the run stays in step with the model.
pub struct Simulator {
    spec: SutSpec,
    index: HashMap<String, usize>,
    current: usize,
    wrong_page: HashMap<String, (String, usize)>,
    failing_checks: HashMap<String, String>,
    pending_fault: Option<String>,
    clock: Box<dyn Clock>,
    events: Vec<CodeCoverageEvent>,
}

impl Simulator {
    /// Registers every server source with no lines covered, then starts on
    /// the initial page and emits its client events.
    pub fn new(spec: SutSpec, clock: Box<dyn Clock>) -> Self {
        let index: HashMap<_, _> = spec
            .pages
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.clone(), i))
            .collect();
        let mut wrong_page = HashMap::new();
        let mut failing_checks = HashMap::new();
        for f in &spec.faults {
            match &f.behavior {
                FaultBehavior::WrongPage(page) => {
                    wrong_page.insert(f.element.clone(), (f.id.clone(), index[page]));
                }
                FaultBehavior::VerificationFail => {
                    failing_checks.insert(f.element.clone(), f.id.clone());
                }
            }
        }
        let current = index[&spec.initial_page];
        let mut sim = Simulator {
            spec,
            index,
            current,
            wrong_page,
            failing_checks,
            pending_fault: None,
            clock,
            events: Vec::new(),
        };
        let mut server: BTreeMap<&str, u32> = BTreeMap::new();
        for p in &sim.spec.pages {
            for s in p.elements.values().flat_map(|e| &e.server) {
                server.insert(&s.source, s.total);
            }
        }
        let t = sim.clock.elapsed().as_secs_f64();
        let registrations: Vec<LineSet> = server
            .into_iter()
            .map(|(source, total)| LineSet {
                source: source.to_string(),
                total,
                lines: BTreeSet::new(),
            })
            .collect();
        for s in &registrations {
            sim.emit(Scope::Server, s, None, t);
        }
        sim.emit_client();
        sim
    }

    pub fn current_page(&self) -> &str {
        &self.spec.pages[self.current].id
    }

    pub fn events(&self) -> &[CodeCoverageEvent] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<CodeCoverageEvent> {
        std::mem::take(&mut self.events)
    }

    fn emit(&mut self, scope: Scope, set: &LineSet, page: Option<String>, t: f64) {
        self.events.push(CodeCoverageEvent {
            timestamp_s: t,
            scope,
            source_id: set.source.clone(),
            page_id: page,
            total_lines: set.total,
            covered_lines: set.lines.clone(),
        });
    }

    fn emit_client(&mut self) {
        let t = self.clock.elapsed().as_secs_f64();
        let page = &self.spec.pages[self.current];
        let (id, sources) = (page.id.clone(), page.client_sources.clone());
        for s in &sources {
            self.emit(Scope::Client, s, Some(id.clone()), t);
        }
    }

    pub fn sim_execute_edge(&mut self, name: &str) -> Outcome {
        let page = &self.spec.pages[self.current];
        let Some(effect) = page.elements.get(name) else {
            return Outcome::fail(format!("`{name}` is not available on page `{}`", page.id));
        };
        let server = effect.server.clone();
        let next = match self.wrong_page.get(name) {
            Some((fault, page)) => {
                self.pending_fault = Some(fault.clone());
                *page
            }
            None => self.index[&effect.next_page],
        };
        let t = self.clock.elapsed().as_secs_f64();
        for s in &server {
            self.emit(Scope::Server, s, None, t);
        }
        self.current = next;
        self.emit_client();
        Outcome::pass()
    }

    pub fn sim_verify_vertex(&mut self, name: &str) -> Outcome {
        let pending = self.pending_fault.take();
        let page = &self.spec.pages[self.current];
        if !page.verifications.contains(name) {
            let message = format!("expected `{name}` but the browser is on page `{}`", page.id);
            if let Some(i) = self
                .spec
                .pages
                .iter()
                .position(|p| p.verifications.contains(name))
            {
                self.current = i;
            }
            return match pending {
                Some(fault) => Outcome::fault(message, fault),
                None => Outcome::fail(message),
            };
        }
        match self.failing_checks.get(name) {
            Some(fault) => Outcome::fault(format!("assertion `{name}` failed"), fault.clone()),
            None => Outcome::pass(),
        }
    }
}

impl Adapter for Simulator {
    fn execute_edge(&mut self, name: &str, _: &Context) -> Outcome {
        self.sim_execute_edge(name)
    }

    fn verify_vertex(&mut self, name: &str, _: &Context) -> Outcome {
        self.sim_verify_vertex(name)
    }

    fn binds_edge(&self, name: &str) -> bool {
        self.spec
            .pages
            .iter()
            .any(|p| p.elements.contains_key(name))
    }

    fn binds_vertex(&self, name: &str) -> bool {
        self.spec
            .pages
            .iter()
            .any(|p| p.verifications.contains(name))
    }
}

/// Shape of a generated suite and its matching SUT.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub models: usize,
    /// Total over all models; at least one per model.
    pub vertices: usize,
    /// Total over all models; at least one per vertex.
    pub edges: usize,
    /// Upper bound; small suites may not have room for every fault.
    pub faults: usize,
    pub seed: u64,
}

pub const HUB_LABEL: &str = "HUB";
const SERVER_SOURCES: [&str; 3] = [
    "AuthService.java",
    "ProjectService.java",
    "CoreServlet.java",
];
const SERVER_LINES: u32 = 400;
const PAGE_SCRIPT_LINES: u32 = 60;
const VENDOR_SCRIPT: &str = "vendor.js";
const VENDOR_LINES: u32 = 300;

fn sample_lines(rng: &mut impl Rng, total: u32, count: usize) -> BTreeSet<u32> {
    let all: Vec<u32> = (1..=total).collect();
    all.choose_multiple(rng, count.min(total as usize))
        .copied()
        .collect()
}

/// Builds a suite of ring-plus-chord models and a SUT with one page per
/// vertex. Vertex 0 of every model carries the shared label `HUB` and all
/// of them live on a single hub page. Every vertex has a requirement tag.
pub fn synthetic(cfg: &SyntheticConfig) -> (Suite, SutSpec) {
    assert!(cfg.models >= 1 && cfg.vertices >= cfg.models && cfg.edges >= cfg.vertices);
    let mut rng = walk_rng(cfg.seed);

    let mut sizes = vec![cfg.vertices / cfg.models; cfg.models];
    for s in sizes.iter_mut().take(cfg.vertices % cfg.models) {
        *s += 1;
    }
    // chords go to models in turn
    let mut chords = vec![0usize; cfg.models];
    for i in 0..cfg.edges - cfg.vertices {
        chords[i % cfg.models] += 1;
    }

    let page_of = |m: usize, v: usize| {
        if v == 0 {
            "hub".to_string()
        } else {
            format!("p{}_{}", m + 1, v)
        }
    };
    let mut models = Vec::new();
    let mut edges_out: Vec<(String, String, String)> = Vec::new(); // name, source page, target vertex name
    let mut page_order = vec!["hub".to_string()];
    let mut verifications: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut bindings: BTreeMap<String, BTreeMap<String, TransitionEffect>> = BTreeMap::new();
    let mut vertex_names = Vec::new();

    for (m, &n) in sizes.iter().enumerate() {
        let mid = format!("m{}", m + 1);
        let vname = |v: usize| format!("n_{mid}_v{v}");
        let mut vertices = Vec::new();
        for v in 0..n {
            let mut vertex = json!({"id": format!("v{v}"), "name": vname(v), "requirements": [format!("R{}.{}", m + 1, v + 1)]});
            if v == 0 {
                vertex["sharedState"] = json!(HUB_LABEL);
            } else {
                page_order.push(page_of(m, v));
            }
            verifications
                .entry(page_of(m, v))
                .or_default()
                .insert(vname(v));
            vertex_names.push(vname(v));
            vertices.push(vertex);
        }
        let mut pairs: Vec<(usize, usize)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        for _ in 0..chords[m] {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n);
            if n > 1 {
                while b == a {
                    b = rng.gen_range(0..n);
                }
            }
            pairs.push((a, b));
        }
        let mut edges = Vec::new();
        for (j, &(a, b)) in pairs.iter().enumerate() {
            let name = format!("e_{mid}_{j}");
            let server_source = SERVER_SOURCES[(m + j) % SERVER_SOURCES.len()];
            let server = vec![LineSet {
                source: server_source.to_string(),
                total: SERVER_LINES,
                lines: sample_lines(&mut rng, SERVER_LINES, 6),
            }];
            bindings.entry(page_of(m, a)).or_default().insert(
                name.clone(),
                TransitionEffect {
                    next_page: page_of(m, b),
                    server,
                },
            );
            edges_out.push((name.clone(), page_of(m, a), vname(b)));
            edges.push(json!({"id": format!("e{j}"), "name": name, "source": format!("v{a}"), "target": format!("v{b}")}));
        }
        models.push(json!({"id": mid, "name": format!("Model {}", m + 1), "vertices": vertices, "edges": edges}));
    }

    let half = page_order.len() / 2;
    let pages: Vec<Page> = page_order
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let mut client_sources = vec![LineSet {
                source: format!("{id}.js"),
                total: PAGE_SCRIPT_LINES,
                lines: sample_lines(&mut rng, PAGE_SCRIPT_LINES, 30),
            }];
            if i >= half && i > 0 {
                client_sources.push(LineSet {
                    source: VENDOR_SCRIPT.to_string(),
                    total: VENDOR_LINES,
                    lines: sample_lines(&mut rng, VENDOR_LINES, 20),
                });
            }
            Page {
                id: id.clone(),
                elements: bindings.remove(id).unwrap_or_default(),
                verifications: verifications.remove(id).unwrap_or_default(),
                client_sources,
            }
        })
        .collect();

    // a wrong-page fault also claims its target vertex: a failing check
    // there would otherwise be masked by the wrong page on that visit
    let mut candidates: Vec<usize> = (0..edges_out.len() + vertex_names.len()).collect();
    candidates.shuffle(&mut rng);
    let mut faults = Vec::new();
    let mut claimed = BTreeSet::new();
    for c in candidates {
        if faults.len() == cfg.faults {
            break;
        }
        let id = format!("F{}", faults.len() + 1);
        if c < edges_out.len() {
            let (name, _, target_name) = &edges_out[c];
            let wrong: Vec<&Page> = pages
                .iter()
                .filter(|p| !p.verifications.contains(target_name))
                .collect();
            if claimed.contains(target_name) || wrong.is_empty() {
                continue;
            }
            let page = wrong.choose(&mut rng).expect("non-empty").id.clone();
            claimed.insert(name.clone());
            claimed.insert(target_name.clone());
            faults.push(FaultSpec {
                id,
                element: name.clone(),
                behavior: FaultBehavior::WrongPage(page),
            });
        } else {
            let name = &vertex_names[c - edges_out.len()];
            if !claimed.insert(name.clone()) {
                continue;
            }
            faults.push(FaultSpec {
                id,
                element: name.clone(),
                behavior: FaultBehavior::VerificationFail,
            });
        }
    }

    let doc = json!({"entry": {"model": "m1", "vertex": "v0"}, "models": models});
    let suite = parse_suite(&doc.to_string()).expect("synthetic suite is well-formed");
    let spec = SutSpec {
        initial_page: "hub".into(),
        pages,
        faults,
    };
    debug_assert_eq!(check_spec(&spec), Ok(()));
    (suite, spec)
}
