#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use etoe_dse::model::{LatencyConstraint, NodeRef, SystemModel};
use etoe_dse::pathfind::{EtoEGraph, GraphNode, NodeId, NodeKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load_fixture(name: &str) -> SystemModel {
    etoe_dse::model::load_system(fixture(name)).expect("fixture loads")
}

/// Random directed graph with `n` nodes named `g:v<i>` and up to three
/// constraints between random nodes.
pub fn random_graph(seed: u64) -> (EtoEGraph, Vec<LatencyConstraint>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=12usize);
    let density = rng.gen_range(0.05..0.45);
    let nodes = (0..n)
        .map(|i| GraphNode {
            kind: NodeKind::FsmState,
            psm: "g".into(),
            local: format!("v{i}"),
            psm_index: 0,
            item: i,
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if rng.gen::<f64>() < density {
                edges.push((a, b));
            }
        }
    }
    let graph = EtoEGraph::from_parts(nodes, edges).unwrap();
    let constraints = (0..rng.gen_range(1..=3usize))
        .map(|k| LatencyConstraint {
            id: format!("c{k}"),
            start: NodeRef {
                psm: "g".into(),
                node: format!("v{}", rng.gen_range(0..n)),
            },
            end: NodeRef {
                psm: "g".into(),
                node: format!("v{}", rng.gen_range(0..n)),
            },
            bound: 1.0,
        })
        .collect();
    (graph, constraints)
}

/// Breadth-first enumeration of every node sequence `start .. end` whose
/// consecutive pairs are edges, whose interior nodes are distinct and
/// differ from both endpoints, and which reaches `end` only at its last
/// position.
pub fn brute_force_paths(graph: &EtoEGraph, start: NodeId, end: NodeId) -> BTreeSet<Vec<NodeId>> {
    let n = graph.node_count();
    let has_edge = |a: NodeId, b: NodeId| graph.edges.contains(&(a, b));
    let mut found = BTreeSet::new();
    let mut frontier: Vec<Vec<NodeId>> = vec![vec![start]];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for seq in frontier {
            let last = *seq.last().unwrap();
            for v in 0..n {
                if !has_edge(last, v) {
                    continue;
                }
                if v == end {
                    let mut p = seq.clone();
                    p.push(v);
                    found.insert(p);
                    continue;
                }
                if v == start || seq.contains(&v) {
                    continue;
                }
                let mut p = seq.clone();
                p.push(v);
                next.push(p);
            }
        }
        frontier = next;
    }
    found
}

/// Sorted, deduplicated objective pairs.
pub fn objective_set(points: impl IntoIterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = points.into_iter().collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v.dedup();
    v
}

/// Naive quadratic non-dominated filter.
pub fn naive_front(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let dominated = |p: (f64, f64)| {
        points
            .iter()
            .any(|q| q.0 <= p.0 && q.1 <= p.1 && (q.0 < p.0 || q.1 < p.1))
    };
    objective_set(points.iter().copied().filter(|&p| !dominated(p)))
}

/// True when every point of `front` is weakly dominated by some reference point.
pub fn covered_by(reference: &[(f64, f64)], front: &[(f64, f64)]) -> bool {
    front
        .iter()
        .all(|p| reference.iter().any(|q| q.0 <= p.0 && q.1 <= p.1))
}
