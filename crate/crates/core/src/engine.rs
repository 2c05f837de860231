//! The step loop.
//!
//! Online runs drive an [`Adapter`] as steps are generated; offline
//! generation runs the same loop against [`PassAdapter`], so guards and
//! actions are still evaluated and the emitted path stays feasible.
//!
//! Order of one iteration: check the stop condition, pick the next edge
//! (resolving a shared-state jump first), execute it, apply its actions,
//! verify the target vertex.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::coverage::CoverageSnapshot;
use crate::generators::{self, guard_allows, GenError, GeneratorKind, Step, StepKind, WalkState};
use crate::guard::{self, Context, EvalError};
use crate::model::{EdgeKey, ElementKey, ElementRef, Suite, VertexKey};
use crate::stop::{is_fulfilled, CoverageState, StopCondition, StopSpecError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Pass,
    Fail,
}

/// Result of executing an edge or verifying a vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub verdict: Verdict,
    pub message: Option<String>,
    /// Set by the simulator when an injected fault caused the failure.
    pub fault_id: Option<String>,
}

pub type ActionOutcome = Outcome;
pub type VerificationOutcome = Outcome;

impl Outcome {
    pub fn pass() -> Self {
        Outcome {
            verdict: Verdict::Pass,
            message: None,
            fault_id: None,
        }
    }

    pub fn fail(message: impl Into<String>) -> Self {
        Outcome {
            verdict: Verdict::Fail,
            message: Some(message.into()),
            fault_id: None,
        }
    }

    pub fn fault(message: impl Into<String>, fault_id: impl Into<String>) -> Self {
        Outcome {
            verdict: Verdict::Fail,
            message: Some(message.into()),
            fault_id: Some(fault_id.into()),
        }
    }

    pub fn is_pass(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Name-keyed glue between model elements and the system under test.
pub trait Adapter {
    fn execute_edge(&mut self, name: &str, ctx: &Context) -> ActionOutcome;
    fn verify_vertex(&mut self, name: &str, ctx: &Context) -> VerificationOutcome;
    fn binds_edge(&self, name: &str) -> bool;
    fn binds_vertex(&self, name: &str) -> bool;
}

/// Binds every name and passes everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassAdapter;

impl Adapter for PassAdapter {
    fn execute_edge(&mut self, _: &str, _: &Context) -> ActionOutcome {
        Outcome::pass()
    }

    fn verify_vertex(&mut self, _: &str, _: &Context) -> VerificationOutcome {
        Outcome::pass()
    }

    fn binds_edge(&self, _: &str) -> bool {
        true
    }

    fn binds_vertex(&self, _: &str) -> bool {
        true
    }
}

type Handler = Box<dyn FnMut(&Context) -> Outcome>;

/// Adapter built from per-name closures.
#[derive(Default)]
pub struct BindingAdapter {
    edges: HashMap<String, Handler>,
    vertices: HashMap<String, Handler>,
}

impl BindingAdapter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn edge(mut self, name: &str, f: impl FnMut(&Context) -> Outcome + 'static) -> Self {
        self.edges.insert(name.to_string(), Box::new(f));
        self
    }

    pub fn vertex(mut self, name: &str, f: impl FnMut(&Context) -> Outcome + 'static) -> Self {
        self.vertices.insert(name.to_string(), Box::new(f));
        self
    }
}

impl Adapter for BindingAdapter {
    fn execute_edge(&mut self, name: &str, ctx: &Context) -> ActionOutcome {
        match self.edges.get_mut(name) {
            Some(f) => f(ctx),
            None => Outcome::fail(format!("no binding for `{name}`")),
        }
    }

    fn verify_vertex(&mut self, name: &str, ctx: &Context) -> VerificationOutcome {
        match self.vertices.get_mut(name) {
            Some(f) => f(ctx),
            None => Outcome::fail(format!("no binding for `{name}`")),
        }
    }

    fn binds_edge(&self, name: &str) -> bool {
        self.edges.contains_key(name)
    }

    fn binds_vertex(&self, name: &str) -> bool {
        self.vertices.contains_key(name)
    }
}

/// Monotonic time source for timestamps and time-based stop conditions.
pub trait Clock {
    fn elapsed(&self) -> Duration;
}

#[derive(Debug, Clone, Copy)]
pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
            start: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }
}

/// Test clock: every read returns the current time, then advances it by
/// `tick`. Clones share the same time.
#[derive(Debug, Clone)]
pub struct ManualClock {
    now: Arc<Mutex<Duration>>,
    tick: Duration,
}

impl ManualClock {
    pub fn new(tick: Duration) -> Self {
        ManualClock {
            now: Arc::new(Mutex::new(Duration::ZERO)),
            tick,
        }
    }

    pub fn advance(&self, by: Duration) {
        *self.now.lock().expect("clock lock") += by;
    }
}

impl Clock for ManualClock {
    fn elapsed(&self) -> Duration {
        let mut now = self.now.lock().expect("clock lock");
        let t = *now;
        *now += self.tick;
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailurePolicy {
    Abort,
    Continue,
}

impl std::str::FromStr for FailurePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abort" => Ok(FailurePolicy::Abort),
            "continue" => Ok(FailurePolicy::Continue),
            other => Err(format!(
                "unknown failure policy `{other}` (expected abort or continue)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub failure_policy: FailurePolicy,
    pub snapshot_interval_s: f64,
    /// Consecutive guard-blocked plans tolerated before giving up.
    pub replan_limit: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            failure_policy: FailurePolicy::Abort,
            snapshot_interval_s: 5.0,
            replan_limit: 3,
        }
    }
}

impl RunConfig {
    pub fn with_seed(seed: u64) -> Self {
        RunConfig {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Contiguous from 1.
    pub seq: u64,
    pub offset_us: u64,
    pub step: Step,
    /// Always set for vertices; set for edges only when the action failed.
    pub verdict: Option<Verdict>,
    pub fault_id: Option<String>,
    /// Context digest after the step's actions.
    pub context: String,
}

impl StepRecord {
    pub fn offset_s(&self) -> f64 {
        self.offset_us as f64 / 1e6
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub seq: u64,
    pub message: String,
    pub fault_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub steps: Vec<StepRecord>,
    /// Elapsed time is the offset of the last step record.
    pub final_coverage: CoverageSnapshot,
    /// Periodic snapshots, one per elapsed `snapshot_interval_s`.
    pub snapshots: Vec<CoverageSnapshot>,
    pub verdict: Verdict,
    pub failures: Vec<Failure>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn plain_steps(&self) -> Vec<Step> {
        self.steps.iter().map(|r| r.step.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Stop(#[from] StopSpecError),
    #[error("generator target `{0}` does not exist")]
    UnknownTarget(ElementRef),
    #[error("adapter has no binding for {kind} `{name}`")]
    MissingBinding { kind: StepKind, name: String },
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error("actions of `{element}` failed: {source}")]
    Action { element: String, source: EvalError },
    #[error("gave up after {limit} consecutive guard-blocked plans")]
    ReplanLimit { limit: u32 },
}

struct Run<'a> {
    suite: &'a Suite,
    generator: &'a GeneratorKind,
    astar_target: Option<ElementKey>,
    astar_arrived: bool,
    stop: &'a StopCondition,
    adapter: &'a mut dyn Adapter,
    cfg: RunConfig,
    clock: &'a dyn Clock,
    state: WalkState,
    cov: CoverageState,
    records: Vec<StepRecord>,
    failures: Vec<Failure>,
    snapshots: Vec<CoverageSnapshot>,
    next_snapshot_s: f64,
    blocked_streak: u32,
    halted: bool,
}

impl Run<'_> {
    fn now_us(&self) -> u64 {
        self.clock.elapsed().as_micros() as u64
    }

    fn push(&mut self, step: Step, outcome: Option<&Outcome>) {
        let seq = self.records.len() as u64 + 1;
        let failed = outcome.filter(|o| !o.is_pass());
        if let Some(o) = failed {
            self.failures.push(Failure {
                seq,
                message: o
                    .message
                    .clone()
                    .unwrap_or_else(|| format!("`{}` failed", step.name)),
                fault_id: o.fault_id.clone(),
            });
            if self.cfg.failure_policy == FailurePolicy::Abort {
                self.halted = true;
            }
        }
        let verdict = match (step.kind, outcome) {
            (StepKind::Vertex, Some(o)) => Some(o.verdict),
            (StepKind::Edge, Some(o)) if !o.is_pass() => Some(Verdict::Fail),
            _ => None,
        };
        self.records.push(StepRecord {
            seq,
            offset_us: self.now_us(),
            step,
            verdict,
            fault_id: failed.and_then(|o| o.fault_id.clone()),
            context: self.state.context.digest(),
        });
    }

    fn verify(&mut self, v: VertexKey) {
        let outcome = self
            .adapter
            .verify_vertex(&self.suite.vertex(v).name, &self.state.context);
        self.state.visited_vertices.insert(v);
        self.cov.visit_vertex(self.suite, v, true);
        self.push(Step::vertex(self.suite, v), Some(&outcome));
        self.maybe_snapshot();
    }

    fn elapsed_s(&self) -> f64 {
        self.clock.elapsed().as_secs_f64()
    }

    fn maybe_snapshot(&mut self) {
        let t = self.records.last().map_or(0.0, StepRecord::offset_s);
        if t >= self.next_snapshot_s {
            self.snapshots
                .push(CoverageSnapshot::from_state(self.suite, &self.cov, t));
            while self.next_snapshot_s <= t {
                self.next_snapshot_s += self.cfg.snapshot_interval_s;
            }
        }
    }

    fn land(&mut self, v: VertexKey) {
        if v != self.state.position {
            self.state.position = v;
            self.state.visited_vertices.insert(v);
            self.cov.visit_vertex(self.suite, v, false);
        }
    }

    fn next_edge(&mut self) -> Result<EdgeKey, EngineError> {
        match self.generator {
            GeneratorKind::Random | GeneratorKind::WeightedRandom => {
                let before = self.state.position;
                let after = generators::resolve_shared_jump(self.suite, &mut self.state);
                if after != before {
                    self.cov.visit_vertex(self.suite, after, false);
                }
                Ok(if *self.generator == GeneratorKind::Random {
                    generators::next_step_random(self.suite, &mut self.state)?
                } else {
                    generators::next_step_weighted(self.suite, &mut self.state)?
                })
            }
            GeneratorKind::QuickRandom | GeneratorKind::AStar(_) => self.next_planned(),
        }
    }

    fn next_planned(&mut self) -> Result<EdgeKey, EngineError> {
        loop {
            if self.state.plan.as_ref().is_none_or(|p| p.is_empty()) {
                let plan = match self.astar_target {
                    None => generators::plan_quick_random(self.suite, &mut self.state)?,
                    Some(_) if self.astar_arrived => return Err(GenError::Exhausted.into()),
                    Some(target) => {
                        let plan = generators::plan_astar(self.suite, &self.state, target)?;
                        if plan.is_empty() {
                            self.astar_arrived = true;
                            return Err(GenError::Exhausted.into());
                        }
                        plan
                    }
                };
                self.state.plan = Some(plan.edges.into());
            }
            let plan = self.state.plan.as_mut().expect("plan set above");
            let next = *plan.front().expect("plan is non-empty");
            let source = self.suite.edge_source(next);
            if source != self.state.position {
                debug_assert!(self
                    .suite
                    .shared_peers(self.state.position)
                    .contains(&source));
                self.land(source);
            }
            if guard_allows(self.suite, next, &self.state.context)? {
                let plan = self.state.plan.as_mut().expect("plan set above");
                plan.pop_front();
                if plan.is_empty() && self.astar_target.is_some() {
                    self.astar_arrived = true;
                }
                return Ok(next);
            }
            // the plan runs into a guard: drop it and plan around the edge
            self.state.plan = None;
            self.state.blocked.insert(next);
            self.blocked_streak += 1;
            if self.blocked_streak > self.cfg.replan_limit {
                return Err(EngineError::ReplanLimit {
                    limit: self.cfg.replan_limit,
                });
            }
        }
    }

    fn traverse(&mut self, e: EdgeKey) -> Result<(), EngineError> {
        let edge = self.suite.edge(e);
        let outcome = self.adapter.execute_edge(&edge.name, &self.state.context);
        self.state.context =
            guard::apply_actions(&edge.actions, &self.state.context).map_err(|source| {
                EngineError::Action {
                    element: self.suite.edge_ref(e).to_string(),
                    source,
                }
            })?;
        self.state.visited_edges.insert(e);
        self.state.blocked.clear();
        self.blocked_streak = 0;
        self.cov.visit_edge(e);
        self.push(Step::edge(self.suite, e), Some(&outcome));
        if self.halted
            || (self.stop.watches_edges()
                && is_fulfilled(self.stop, &self.cov, self.suite, self.elapsed_s()))
        {
            self.halted = true;
            return Ok(());
        }
        let target = self.suite.edge_target(e);
        self.state.position = target;
        self.verify(target);
        Ok(())
    }

    fn finish(mut self) -> RunReport {
        let last_us = self.records.last().map_or(0, |r| r.offset_us);
        let final_coverage =
            CoverageSnapshot::from_state(self.suite, &self.cov, last_us as f64 / 1e6);
        let wall_time_s = self.elapsed_s();
        self.snapshots.push(final_coverage);
        RunReport {
            steps: self.records,
            final_coverage,
            snapshots: self.snapshots,
            verdict: if self.failures.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            failures: self.failures,
            wall_time_s,
        }
    }
}

fn check_bindings(suite: &Suite, adapter: &dyn Adapter) -> Result<(), EngineError> {
    let reachable = suite.reachable_from(suite.entry());
    for v in suite.vertex_keys().filter(|v| reachable[v.0]) {
        let name = &suite.vertex(v).name;
        if !adapter.binds_vertex(name) {
            return Err(EngineError::MissingBinding {
                kind: StepKind::Vertex,
                name: name.clone(),
            });
        }
        for &e in suite.out_edges(v) {
            let name = &suite.edge(e).name;
            if !adapter.binds_edge(name) {
                return Err(EngineError::MissingBinding {
                    kind: StepKind::Edge,
                    name: name.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Runs the suite against `adapter` until `stop` holds, a failure aborts the
/// run, or generation cannot continue (an error).
pub fn run_online_with_clock(
    suite: &Suite,
    generator: &GeneratorKind,
    stop: &StopCondition,
    adapter: &mut dyn Adapter,
    cfg: &RunConfig,
    clock: &dyn Clock,
) -> Result<RunReport, EngineError> {
    stop.check_refs(suite)?;
    let astar_target = match generator {
        GeneratorKind::AStar(r) => Some(
            suite
                .resolve(r)
                .ok_or_else(|| EngineError::UnknownTarget(r.clone()))?,
        ),
        _ => None,
    };
    check_bindings(suite, adapter)?;

    let mut ctx = Context::new();
    for m in suite.models() {
        ctx =
            guard::apply_actions(&m.init_actions, &ctx).map_err(|source| EngineError::Action {
                element: format!("{} init", m.id),
                source,
            })?;
    }
    let mut run = Run {
        suite,
        generator,
        astar_target,
        astar_arrived: false,
        stop,
        adapter,
        cfg: *cfg,
        clock,
        state: WalkState::new(suite.entry(), ctx, cfg.seed),
        cov: CoverageState::new(),
        records: Vec::new(),
        failures: Vec::new(),
        snapshots: Vec::new(),
        next_snapshot_s: 0.0,
        blocked_streak: 0,
        halted: false,
    };
    run.verify(suite.entry());
    while !run.halted && !is_fulfilled(run.stop, &run.cov, suite, run.elapsed_s()) {
        let edge = run.next_edge()?;
        run.traverse(edge)?;
    }
    Ok(run.finish())
}

pub fn run_online(
    suite: &Suite,
    generator: &GeneratorKind,
    stop: &StopCondition,
    adapter: &mut dyn Adapter,
    cfg: &RunConfig,
) -> Result<RunReport, EngineError> {
    run_online_with_clock(suite, generator, stop, adapter, cfg, &SystemClock::new())
}

/// Derives a path without executing anything.
pub fn generate_offline(
    suite: &Suite,
    generator: &GeneratorKind,
    stop: &StopCondition,
    seed: u64,
) -> Result<Vec<Step>, EngineError> {
    let report = run_online(
        suite,
        generator,
        stop,
        &mut PassAdapter,
        &RunConfig::with_seed(seed),
    )?;
    Ok(report.plain_steps())
}
