mod common;

use std::collections::BTreeSet;

use etoe_dse::pathfind::{build_graph, find_etoe_paths};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dfs_matches_brute_force(seed in any::<u64>()) {
        let (graph, constraints) = common::random_graph(seed);
        let set = find_etoe_paths(&graph, &constraints).unwrap();
        prop_assert_eq!(set.entries.len(), constraints.len());
        for entry in &set.entries {
            let got: BTreeSet<Vec<usize>> = entry.paths.iter().cloned().collect();
            prop_assert_eq!(got.len(), entry.paths.len());
            let want = common::brute_force_paths(&graph, entry.start, entry.end);
            prop_assert_eq!(got, want);
        }
    }
}

#[test]
fn tiny_fixture_has_single_path() {
    let model = common::load_fixture("tiny.json");
    let graph = build_graph(&model);
    let set = find_etoe_paths(&graph, &model.constraints).unwrap();
    let labels: Vec<Vec<String>> = set.entries[0]
        .paths
        .iter()
        .map(|p| p.iter().map(|&n| graph.nodes[n].label()).collect())
        .collect();
    assert_eq!(labels.len(), 1);
    assert_eq!(labels[0].first().unwrap(), "p1:a");
    assert_eq!(labels[0].last().unwrap(), "p2:c");
    assert!(labels[0].iter().any(|l| l == "p1:m1"));
}

#[test]
fn unreachable_end_gives_no_paths() {
    let (graph, _) = common::random_graph(7);
    let n = graph.node_count();
    let isolated: Vec<usize> = (0..n)
        .filter(|&v| !graph.edges.iter().any(|&(a, b)| a == v || b == v))
        .collect();
    for &v in &isolated {
        for s in 0..n {
            if s != v {
                assert!(common::brute_force_paths(&graph, s, v).is_empty());
            }
        }
    }
}
