//! Test fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use mbt_core::model::{EdgeKey, ElementKey, Suite, VertexKey};
use mbt_core::parse_suite;
use rand::Rng;
use serde_json::json;

/// Single-model digraph with optional shared labels, kept in plain vectors
/// so oracles never touch the library's graph code.
#[derive(Debug, Clone)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub labels: Vec<Option<u8>>,
}

impl Graph {
    pub fn random(rng: &mut impl Rng, max_vertices: usize, with_labels: bool) -> Graph {
        let n = rng.gen_range(1..=max_vertices);
        let m = rng.gen_range(0..=2 * n);
        let edges = (0..m)
            .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
            .collect();
        let labels = (0..n)
            .map(|_| (with_labels && rng.gen_bool(0.3)).then(|| rng.gen_range(0..2u8)))
            .collect();
        Graph { n, edges, labels }
    }

    pub fn ring_with_chords(n: usize, m: usize, rng: &mut impl Rng) -> Graph {
        assert!(m >= n);
        let mut edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        while edges.len() < m {
            edges.push((rng.gen_range(0..n), rng.gen_range(0..n)));
        }
        Graph {
            n,
            edges,
            labels: vec![None; n],
        }
    }

    pub fn to_json(&self) -> String {
        let vertices: Vec<_> = (0..self.n)
            .map(|i| {
                let mut v = json!({"id": format!("v{i}"), "name": format!("n_v{i}"), "requirements": [format!("R{i}")]});
                if let Some(l) = self.labels[i] {
                    v["sharedState"] = json!(format!("L{l}"));
                }
                v
            })
            .collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .enumerate()
            .map(|(j, (a, b))| json!({"id": format!("e{j}"), "name": format!("e_{j}"), "source": format!("v{a}"), "target": format!("v{b}")}))
            .collect();
        json!({"entry": {"model": "g", "vertex": "v0"},
               "models": [{"id": "g", "name": "graph", "vertices": vertices, "edges": edges}]})
        .to_string()
    }

    pub fn to_suite(&self) -> Suite {
        parse_suite(&self.to_json()).expect("generated graph parses")
    }

    fn peers(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let label = self.labels[v];
        (0..self.n).filter(move |&u| u != v && label.is_some() && self.labels[u] == label)
    }

    /// Minimum number of edges over every simple path from `from` to `to`;
    /// moving to a same-label vertex costs nothing.
    pub fn exhaustive_min_hops(&self, from: usize, to: usize) -> Option<usize> {
        fn dfs(
            g: &Graph,
            v: usize,
            to: usize,
            cost: usize,
            seen: &mut Vec<bool>,
            best: &mut Option<usize>,
        ) {
            if v == to {
                *best = Some(best.map_or(cost, |b| b.min(cost)));
                return;
            }
            let moves: Vec<(usize, usize)> = g
                .edges
                .iter()
                .filter(|(a, _)| *a == v)
                .map(|&(_, b)| (b, 1))
                .chain(g.peers(v).map(|u| (u, 0)))
                .collect();
            for (u, c) in moves {
                if !seen[u] {
                    seen[u] = true;
                    dfs(g, u, to, cost + c, seen, best);
                    seen[u] = false;
                }
            }
        }
        let mut seen = vec![false; self.n];
        seen[from] = true;
        let mut best = None;
        dfs(self, from, to, 0, &mut seen, &mut best);
        best
    }

    /// True if `edges` can be walked from `from`, jumping only between
    /// same-label vertices.
    pub fn is_walk(&self, from: usize, edges: &[usize]) -> bool {
        let mut at = from;
        for &e in edges {
            let (a, b) = self.edges[e];
            if a != at && !self.peers(at).any(|p| p == a) {
                return false;
            }
            at = b;
        }
        true
    }
}

pub fn vertex(i: usize) -> ElementKey {
    ElementKey::Vertex(VertexKey(i))
}

pub fn edge(j: usize) -> ElementKey {
    ElementKey::Edge(EdgeKey(j))
}
