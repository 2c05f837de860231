mod common;

use common::Graph;
use mbt_core::generators::{plan_astar, walk_rng, WalkState};
use mbt_core::model::{ElementKey, VertexKey};
use mbt_core::Context;
use proptest::prelude::*;

fn check(g: &Graph, from: usize, target: ElementKey) -> Result<(), String> {
    let suite = g.to_suite();
    let state = WalkState::new(VertexKey(from), Context::new(), 0);
    let expected = match target {
        ElementKey::Vertex(v) => g.exhaustive_min_hops(from, v.0),
        ElementKey::Edge(e) => g.exhaustive_min_hops(from, g.edges[e.0].0).map(|h| h + 1),
    };
    match (plan_astar(&suite, &state, target), expected) {
        (Ok(plan), Some(hops)) => {
            let edges: Vec<usize> = plan.edges.iter().map(|e| e.0).collect();
            if edges.len() != hops {
                return Err(format!(
                    "{g:?} {from}->{target:?}: planned {edges:?}, oracle {hops}"
                ));
            }
            if !g.is_walk(from, &edges) {
                return Err(format!("{g:?}: {edges:?} is not a walk"));
            }
            match target {
                ElementKey::Edge(e) if edges.last() != Some(&e.0) => {
                    Err(format!("{edges:?} does not end in {e:?}"))
                }
                ElementKey::Vertex(v)
                    if !edges.is_empty()
                        && g.edges[*edges.last().unwrap()].1 != v.0
                        && g.labels[v.0].is_none() =>
                {
                    Err(format!("{edges:?} does not arrive at {v:?}"))
                }
                _ => Ok(()),
            }
        }
        (Err(_), None) => Ok(()),
        (got, want) => Err(format!(
            "{g:?} {from}->{target:?}: planner {got:?}, oracle {want:?}"
        )),
    }
}

#[test]
fn astar_matches_exhaustive_enumeration() {
    let mut rng = walk_rng(20);
    for _ in 0..200 {
        let g = Graph::random(&mut rng, 10, true);
        let from = rand::Rng::gen_range(&mut rng, 0..g.n);
        for v in 0..g.n {
            check(&g, from, common::vertex(v)).unwrap();
        }
        for e in 0..g.edges.len() {
            check(&g, from, common::edge(e)).unwrap();
        }
    }
}

proptest! {
    #[test]
    fn astar_is_minimal(seed in any::<u64>(), labels in any::<bool>()) {
        let mut rng = walk_rng(seed);
        let g = Graph::random(&mut rng, 8, labels);
        let target = rand::Rng::gen_range(&mut rng, 0..g.n);
        prop_assert_eq!(check(&g, 0, common::vertex(target)), Ok(()));
    }
}
