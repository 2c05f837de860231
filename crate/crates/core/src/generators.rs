//! Path generators: Random, Weighted random, Quick random and A*.
//!
//! Path planning runs over the jump-augmented graph: every edge costs one
//! hop and moving between vertices with the same shared-state label is free.
//! With unit costs and a zero heuristic, A* and Dijkstra both reduce to a
//! breadth-first search, which is what [`shortest_path`] implements.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use thiserror::Error;

use crate::guard::{self, Context, EvalError};
use crate::model::{EdgeKey, ElementKey, ElementRef, Suite, VertexKey};

/// Seedable PRNG used for every random choice (SplitMix64).
pub type WalkRng = SplitMix64;

pub fn walk_rng(seed: u64) -> WalkRng {
    SplitMix64::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Position {
    pub model_id: String,
    pub vertex_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Edge,
    Vertex,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepKind::Edge => "edge",
            StepKind::Vertex => "vertex",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub kind: StepKind,
    pub model_id: String,
    pub element_id: String,
    pub name: String,
}

impl Step {
    pub fn vertex(suite: &Suite, key: VertexKey) -> Self {
        Step {
            kind: StepKind::Vertex,
            model_id: suite.vertex_model(key).id.clone(),
            element_id: suite.vertex(key).id.clone(),
            name: suite.vertex(key).name.clone(),
        }
    }

    pub fn edge(suite: &Suite, key: EdgeKey) -> Self {
        Step {
            kind: StepKind::Edge,
            model_id: suite.edge_model(key).id.clone(),
            element_id: suite.edge(key).id.clone(),
            name: suite.edge(key).name.clone(),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} ({}/{})",
            self.kind, self.name, self.model_id, self.element_id
        )
    }
}

/// Ordered edges to walk; each edge departs from the previous edge's target
/// or from a vertex sharing its label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlannedPath {
    pub edges: Vec<EdgeKey>,
}

impl PlannedPath {
    /// Number of edges (hops).
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Edge/vertex steps, each edge followed by its target vertex.
    pub fn steps(&self, suite: &Suite) -> Vec<Step> {
        self.edges
            .iter()
            .flat_map(|&e| {
                [
                    Step::edge(suite, e),
                    Step::vertex(suite, suite.edge_target(e)),
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorKind {
    Random,
    WeightedRandom,
    QuickRandom,
    AStar(ElementRef),
}

impl GeneratorKind {
    pub fn is_planning(&self) -> bool {
        matches!(self, GeneratorKind::QuickRandom | GeneratorKind::AStar(_))
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorKind::Random => f.write_str("random"),
            GeneratorKind::WeightedRandom => f.write_str("weighted"),
            GeneratorKind::QuickRandom => f.write_str("quickrandom"),
            GeneratorKind::AStar(target) => write!(f, "astar:{target}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error(
    "unknown generator `{0}` (expected random, weighted, quickrandom or astar:<model>/<element>)"
)]
pub struct UnknownGenerator(pub String);

impl FromStr for GeneratorKind {
    type Err = UnknownGenerator;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "random" => Ok(GeneratorKind::Random),
            "weighted" => Ok(GeneratorKind::WeightedRandom),
            "quickrandom" => Ok(GeneratorKind::QuickRandom),
            other => other
                .strip_prefix("astar:")
                .and_then(ElementRef::parse)
                .map(GeneratorKind::AStar)
                .ok_or_else(|| UnknownGenerator(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("dead end at `{0}`: no enabled out-edge")]
    DeadEnd(ElementRef),
    #[error("guard of edge `{edge}` failed to evaluate: {source}")]
    Guard { edge: ElementRef, source: EvalError },
    #[error("planning exhausted: no unvisited edge is reachable")]
    Exhausted,
    #[error("`{0}` is unreachable from the current position")]
    Unreachable(ElementRef),
}

/// Mutable cursor of a walk.
#[derive(Debug, Clone)]
pub struct WalkState {
    pub position: VertexKey,
    pub context: Context,
    pub visited_edges: BTreeSet<EdgeKey>,
    pub visited_vertices: BTreeSet<VertexKey>,
    pub rng: WalkRng,
    pub plan: Option<VecDeque<EdgeKey>>,
    /// Edges found blocked by a guard since the last successful traversal.
    pub blocked: BTreeSet<EdgeKey>,
}

impl WalkState {
    pub fn new(position: VertexKey, context: Context, seed: u64) -> Self {
        WalkState {
            position,
            context,
            visited_edges: BTreeSet::new(),
            visited_vertices: BTreeSet::from([position]),
            rng: walk_rng(seed),
            plan: None,
            blocked: BTreeSet::new(),
        }
    }

    pub fn position(&self, suite: &Suite) -> Position {
        let r = suite.vertex_ref(self.position);
        Position {
            model_id: r.model,
            vertex_id: r.element,
        }
    }
}

pub fn guard_allows(suite: &Suite, edge: EdgeKey, ctx: &Context) -> Result<bool, GenError> {
    match &suite.edge(edge).guard {
        None => Ok(true),
        Some(g) => guard::eval_guard(&g.expr, ctx).map_err(|source| GenError::Guard {
            edge: suite.edge_ref(edge),
            source,
        }),
    }
}

/// Out-edges of the current vertex whose guard is absent or true.
pub fn enabled_out_edges(suite: &Suite, state: &WalkState) -> Result<Vec<EdgeKey>, GenError> {
    let mut out = Vec::new();
    for &e in suite.out_edges(state.position) {
        if guard_allows(suite, e, &state.context)? {
            out.push(e);
        }
    }
    Ok(out)
}

pub fn next_step_random(suite: &Suite, state: &mut WalkState) -> Result<EdgeKey, GenError> {
    let enabled = enabled_out_edges(suite, state)?;
    if enabled.is_empty() {
        return Err(GenError::DeadEnd(suite.vertex_ref(state.position)));
    }
    Ok(enabled[state.rng.gen_range(0..enabled.len())])
}

/// Default weight of an edge without an explicit `weight`.
pub const DEFAULT_WEIGHT: f64 = 1.0;

pub fn next_step_weighted(suite: &Suite, state: &mut WalkState) -> Result<EdgeKey, GenError> {
    let enabled = enabled_out_edges(suite, state)?;
    if enabled.is_empty() {
        return Err(GenError::DeadEnd(suite.vertex_ref(state.position)));
    }
    let weights = enabled
        .iter()
        .map(|&e| suite.edge(e).weight.unwrap_or(DEFAULT_WEIGHT));
    let dist = WeightedIndex::new(weights).expect("weights are validated to lie in (0, 1]");
    Ok(enabled[dist.sample(&mut state.rng)])
}

/// Chooses among the same-label group of the current vertex, itself included.
pub fn resolve_shared_jump(suite: &Suite, state: &mut WalkState) -> VertexKey {
    let peers = suite.shared_peers(state.position);
    if peers.len() > 1 {
        state.position = peers[state.rng.gen_range(0..peers.len())];
        state.visited_vertices.insert(state.position);
    }
    state.position
}

#[derive(Debug, Clone, Copy)]
enum Pred {
    Start,
    Edge(EdgeKey),
    Jump(VertexKey),
}

struct Search {
    pred: Vec<Option<Pred>>,
}

impl Search {
    fn run(suite: &Suite, from: VertexKey, avoid: &BTreeSet<EdgeKey>) -> Self {
        let mut pred = vec![None; suite.vertex_count()];
        let mut queue = VecDeque::new();
        let discover = |v: VertexKey,
                        how: Pred,
                        pred: &mut Vec<Option<Pred>>,
                        queue: &mut VecDeque<VertexKey>| {
            if pred[v.0].is_some() {
                return;
            }
            pred[v.0] = Some(how);
            queue.push_back(v);
            for &peer in suite.shared_peers(v) {
                if pred[peer.0].is_none() {
                    pred[peer.0] = Some(Pred::Jump(v));
                    queue.push_back(peer);
                }
            }
        };
        discover(from, Pred::Start, &mut pred, &mut queue);
        while let Some(v) = queue.pop_front() {
            for &e in suite.out_edges(v) {
                if !avoid.contains(&e) {
                    discover(suite.edge_target(e), Pred::Edge(e), &mut pred, &mut queue);
                }
            }
        }
        Search { pred }
    }

    fn reaches(&self, v: VertexKey) -> bool {
        self.pred[v.0].is_some()
    }

    fn path_to(&self, suite: &Suite, mut v: VertexKey) -> Option<Vec<EdgeKey>> {
        let mut edges = Vec::new();
        loop {
            match self.pred[v.0]? {
                Pred::Start => break,
                Pred::Jump(from) => v = from,
                Pred::Edge(e) => {
                    edges.push(e);
                    v = suite.edge_source(e);
                }
            }
        }
        edges.reverse();
        Some(edges)
    }
}

fn shortest_avoiding(
    suite: &Suite,
    from: VertexKey,
    to: ElementKey,
    avoid: &BTreeSet<EdgeKey>,
) -> Option<PlannedPath> {
    let search = Search::run(suite, from, avoid);
    let edges = match to {
        ElementKey::Vertex(v) => search.path_to(suite, v)?,
        ElementKey::Edge(e) if avoid.contains(&e) => return None,
        ElementKey::Edge(e) => {
            let mut edges = search.path_to(suite, suite.edge_source(e))?;
            edges.push(e);
            edges
        }
    };
    Some(PlannedPath { edges })
}

fn element_ref(suite: &Suite, key: ElementKey) -> ElementRef {
    match key {
        ElementKey::Vertex(v) => suite.vertex_ref(v),
        ElementKey::Edge(e) => suite.edge_ref(e),
    }
}

/// Minimum-hop path from `from` to a vertex, or to and through an edge.
///
/// Guards are ignored. Among equal-length routes the one whose edges come
/// first in declaration order wins.
pub fn shortest_path(
    suite: &Suite,
    from: VertexKey,
    to: ElementKey,
) -> Result<PlannedPath, GenError> {
    shortest_avoiding(suite, from, to, &BTreeSet::new())
        .ok_or_else(|| GenError::Unreachable(element_ref(suite, to)))
}

pub fn plan_astar(
    suite: &Suite,
    state: &WalkState,
    target: ElementKey,
) -> Result<PlannedPath, GenError> {
    shortest_avoiding(suite, state.position, target, &state.blocked)
        .ok_or_else(|| GenError::Unreachable(element_ref(suite, target)))
}

/// Picks a reachable unvisited edge uniformly at random and plans the
/// shortest route to and through it. Guards along the route are not checked.
pub fn plan_quick_random(suite: &Suite, state: &mut WalkState) -> Result<PlannedPath, GenError> {
    let search = Search::run(suite, state.position, &state.blocked);
    let candidates: Vec<EdgeKey> = suite
        .edge_keys()
        .filter(|e| {
            !state.visited_edges.contains(e)
                && !state.blocked.contains(e)
                && search.reaches(suite.edge_source(*e))
        })
        .collect();
    if candidates.is_empty() {
        return Err(GenError::Exhausted);
    }
    let chosen = candidates[state.rng.gen_range(0..candidates.len())];
    let mut edges = search
        .path_to(suite, suite.edge_source(chosen))
        .expect("candidate source is reachable");
    edges.push(chosen);
    Ok(PlannedPath { edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_suite;
    use crate::model::tests::{LINE, TWO_MODELS};
    use serde_json::json;

    fn fan(weights: &[Option<f64>], guards: &[Option<&str>]) -> Suite {
        let n = weights.len().max(guards.len());
        let vertices: Vec<_> = (0..=n)
            .map(|i| json!({"id": format!("v{i}"), "name": format!("n_{i}")}))
            .collect();
        let edges: Vec<_> = (0..n)
            .map(|i| {
                let mut e = json!({"id": format!("e{i}"), "name": format!("e_{i}"),
                    "source": "v0", "target": format!("v{}", i + 1)});
                if let Some(Some(w)) = weights.get(i) {
                    e["weight"] = json!(w);
                }
                if let Some(Some(g)) = guards.get(i) {
                    e["guard"] = json!(g);
                }
                e
            })
            .collect();
        let doc = json!({"entry": {"model": "f", "vertex": "v0"},
            "models": [{"id": "f", "name": "fan", "initActions": ["x = 0"],
                "vertices": vertices, "edges": edges}]});
        parse_suite(&doc.to_string()).unwrap()
    }

    fn start(suite: &Suite, seed: u64) -> WalkState {
        let ctx = guard::apply_actions(&suite.models()[0].init_actions, &Context::new()).unwrap();
        WalkState::new(suite.entry(), ctx, seed)
    }

    fn frequencies(suite: &Suite, n: usize, weighted: bool) -> Vec<f64> {
        let mut state = start(suite, 7);
        let mut counts = vec![0usize; suite.edge_count()];
        for _ in 0..n {
            let e = if weighted {
                next_step_weighted(suite, &mut state)
            } else {
                next_step_random(suite, &mut state)
            }
            .unwrap();
            counts[e.0] += 1;
        }
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    }

    fn three_sigma(p: f64, n: usize) -> f64 {
        3.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn enabled_edges_follow_declaration_order_and_guards() {
        let suite = fan(&[None, None, None], &[]);
        let state = start(&suite, 0);
        assert_eq!(
            enabled_out_edges(&suite, &state).unwrap(),
            [EdgeKey(0), EdgeKey(1), EdgeKey(2)]
        );

        let suite = fan(&[], &[Some("x > 0"), None, Some("x>0")]);
        let state = start(&suite, 0);
        assert_eq!(enabled_out_edges(&suite, &state).unwrap(), [EdgeKey(1)]);

        let suite = fan(&[], &[Some("x > 0"), Some("false")]);
        let mut state = start(&suite, 0);
        assert!(enabled_out_edges(&suite, &state).unwrap().is_empty());
        assert!(matches!(
            next_step_random(&suite, &mut state),
            Err(GenError::DeadEnd(_))
        ));

        let suite = fan(&[], &[Some("y > 0")]);
        let state = start(&suite, 0);
        assert!(matches!(
            enabled_out_edges(&suite, &state),
            Err(GenError::Guard { .. })
        ));
    }

    #[test]
    fn forced_choice_is_seed_independent() {
        let suite = fan(&[Some(0.001)], &[]);
        for seed in 0..20 {
            let mut state = start(&suite, seed);
            assert_eq!(next_step_random(&suite, &mut state).unwrap(), EdgeKey(0));
            assert_eq!(next_step_weighted(&suite, &mut state).unwrap(), EdgeKey(0));
        }
    }

    #[test]
    fn seeded_choices_repeat() {
        let suite = fan(&[None; 4], &[]);
        let draw = |seed| {
            let mut state = start(&suite, seed);
            (0..50)
                .map(|_| next_step_random(&suite, &mut state).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn random_selection_is_uniform() {
        let n = 10_000;
        for k in 2..=5 {
            let suite = fan(&vec![None; k], &[]);
            let p = 1.0 / k as f64;
            for f in frequencies(&suite, n, false) {
                assert!((f - p).abs() <= three_sigma(p, n), "k={k} f={f}");
            }
        }
        // bound quoted for the two-edge fan
        assert!((three_sigma(0.5, n) - 0.015).abs() < 1e-12);
    }

    #[test]
    fn weighted_selection_follows_normalized_weights() {
        let n = 10_000;
        let f = frequencies(&fan(&[Some(0.9), Some(0.1)], &[]), n, true);
        assert!((f[0] - 0.9).abs() <= three_sigma(0.9, n), "{f:?}");
        assert!((three_sigma(0.9, n) - 0.009).abs() < 1e-12);

        // 0.5 vs default 1.0 normalizes to 1/3 and 2/3
        let f = frequencies(&fan(&[Some(0.5), None], &[]), n, true);
        assert!(
            (f[0] - 1.0 / 3.0).abs() <= three_sigma(1.0 / 3.0, n),
            "{f:?}"
        );
        assert!(
            (f[1] - 2.0 / 3.0).abs() <= three_sigma(2.0 / 3.0, n),
            "{f:?}"
        );

        // all-unweighted matches uniform
        let f = frequencies(&fan(&[None, None, None], &[]), n, true);
        for x in f {
            assert!((x - 1.0 / 3.0).abs() <= three_sigma(1.0 / 3.0, n));
        }
    }

    #[test]
    fn shared_jump_distribution() {
        let suite = parse_suite(TWO_MODELS).unwrap();
        let l1 = VertexKey(1);
        let d0 = VertexKey(2);
        let mut state = WalkState::new(l1, Context::new(), 3);
        let n = 10_000;
        let mut stays = 0;
        for _ in 0..n {
            state.position = l1;
            if resolve_shared_jump(&suite, &mut state) == l1 {
                stays += 1;
            }
        }
        let f = stays as f64 / n as f64;
        assert!((f - 0.5).abs() <= 0.015, "{f}");
        assert!(state.visited_vertices.contains(&d0));

        // singleton group and unlabeled vertices stay put
        let mut state = WalkState::new(VertexKey(0), Context::new(), 3);
        assert_eq!(resolve_shared_jump(&suite, &mut state), VertexKey(0));
    }

    #[test]
    fn shortest_path_cases() {
        let suite = parse_suite(LINE).unwrap();
        let a = VertexKey(0);
        let p = shortest_path(&suite, a, ElementKey::Vertex(VertexKey(1))).unwrap();
        assert_eq!(p.edges, [EdgeKey(0)]);
        assert!(shortest_path(&suite, a, ElementKey::Vertex(a))
            .unwrap()
            .is_empty());
        let p = shortest_path(&suite, a, ElementKey::Edge(EdgeKey(1))).unwrap();
        assert_eq!(p.edges, [EdgeKey(0), EdgeKey(1)]);
        assert_eq!(p.steps(&suite).len(), 4);
        let err = shortest_path(&suite, VertexKey(2), ElementKey::Vertex(a)).unwrap_err();
        assert_eq!(err, GenError::Unreachable(ElementRef::new("m", "a")));
    }

    #[test]
    fn shortest_path_crosses_shared_jump() {
        let suite = parse_suite(TWO_MODELS).unwrap();
        // login/l0 -> dash/d1 needs le, jump HOME, de
        let p = shortest_path(&suite, VertexKey(0), ElementKey::Vertex(VertexKey(3))).unwrap();
        assert_eq!(p.edges, [EdgeKey(0), EdgeKey(2)]);
        assert_ne!(suite.edge_target(p.edges[0]), suite.edge_source(p.edges[1]));
        assert_eq!(
            suite.vertex(suite.edge_target(p.edges[0])).shared_state,
            suite.vertex(suite.edge_source(p.edges[1])).shared_state
        );
    }

    #[test]
    fn equal_routes_prefer_earlier_declared_edge() {
        let doc = json!({"entry": {"model": "m", "vertex": "s"},
            "models": [{"id": "m", "name": "m",
                "vertices": [{"id": "s", "name": "n_s"}, {"id": "a", "name": "n_a"},
                             {"id": "b", "name": "n_b"}, {"id": "t", "name": "n_t"}],
                "edges": [
                    {"id": "sb", "name": "e_sb", "source": "s", "target": "b"},
                    {"id": "sa", "name": "e_sa", "source": "s", "target": "a"},
                    {"id": "at", "name": "e_at", "source": "a", "target": "t"},
                    {"id": "bt", "name": "e_bt", "source": "b", "target": "t"}]}]});
        let suite = parse_suite(&doc.to_string()).unwrap();
        let p = shortest_path(&suite, VertexKey(0), ElementKey::Vertex(VertexKey(3))).unwrap();
        assert_eq!(p.edges, [EdgeKey(0), EdgeKey(3)]);
    }

    #[test]
    fn quick_random_adjacent_target_is_a_single_hop() {
        let suite = parse_suite(LINE).unwrap();
        let mut state = WalkState::new(VertexKey(1), Context::new(), 0);
        state.visited_edges.insert(EdgeKey(0));
        let p = plan_quick_random(&suite, &mut state).unwrap();
        assert_eq!(p.edges, [EdgeKey(1)]);
        let steps = p.steps(&suite);
        assert_eq!(steps[0].name, "e_bc");
        assert_eq!(steps[1].name, "n_c");

        state.visited_edges.insert(EdgeKey(1));
        assert_eq!(
            plan_quick_random(&suite, &mut state),
            Err(GenError::Exhausted)
        );
    }

    #[test]
    fn quick_random_never_targets_visited_edges() {
        let suite = parse_suite(TWO_MODELS).unwrap();
        for seed in 0..50 {
            let mut state = WalkState::new(VertexKey(0), Context::new(), seed);
            state.visited_edges.extend([EdgeKey(0), EdgeKey(2)]);
            let p = plan_quick_random(&suite, &mut state).unwrap();
            let target = *p.edges.last().unwrap();
            assert!(!state.visited_edges.contains(&target));
        }
    }

    #[test]
    fn generator_spec_strings() {
        assert_eq!("random".parse(), Ok(GeneratorKind::Random));
        assert_eq!("weighted".parse(), Ok(GeneratorKind::WeightedRandom));
        assert_eq!("quickrandom".parse(), Ok(GeneratorKind::QuickRandom));
        assert_eq!(
            "astar:login/v2".parse(),
            Ok(GeneratorKind::AStar(ElementRef::new("login", "v2")))
        );
        assert!("astar:login".parse::<GeneratorKind>().is_err());
        assert!("dfs".parse::<GeneratorKind>().is_err());
        for g in ["random", "weighted", "quickrandom", "astar:a/b"] {
            assert_eq!(g.parse::<GeneratorKind>().unwrap().to_string(), g);
        }
    }
}
