mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use taxembed_core::taxonomy::{ConceptGraph, ConceptId};

use common::{ancestors_by_paths, dag_edge_list, random_dag, rng, sibling_oracle};

fn graph_from(edges: &[(usize, usize)], n: usize) -> ConceptGraph {
    // a non-is-a edge per node keeps nodes without is-a edges in the graph
    let mut text = dag_edge_list(edges);
    for i in 0..n {
        text.push_str(&format!("c{i}\trelated\tc{i}x\n"));
    }
    ConceptGraph::parse_edge_list(&text).unwrap()
}

fn id_of(g: &ConceptGraph, i: usize) -> ConceptId {
    g.id(&format!("c{i}")).unwrap()
}

#[test]
fn subsumers_match_path_enumeration() {
    let mut r = rng(11);
    for case in 0..60 {
        let n = 4 + case % 20;
        let edges = random_dag(&mut r, n, 3);
        let g = graph_from(&edges, n);
        for node in 0..n {
            for depth in 1..=4 {
                let want = ancestors_by_paths(&edges, node, depth);
                let closure = g.subsumers(id_of(&g, node), depth).unwrap();
                for step in 1..=depth {
                    let got: BTreeSet<String> = closure
                        .at_step(step)
                        .iter()
                        .map(|c| g.label(*c).to_string())
                        .collect();
                    let expected: BTreeSet<String> = want
                        .iter()
                        .filter(|(_, d)| **d == step)
                        .map(|(a, _)| format!("c{a}"))
                        .collect();
                    assert_eq!(got, expected, "case {case} node {node} step {step}");
                }
            }
        }
    }
}

#[test]
fn sibling_split_matches_ancestor_intersection() {
    let mut r = rng(12);
    for case in 0..40 {
        let n = 8 + case % 25;
        let edges = random_dag(&mut r, n, 2);
        let g = graph_from(&edges, n);
        let mut nodes: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        nodes.shuffle(&mut r);
        let split = n / 3;
        let zs: BTreeSet<usize> = nodes[..split.max(1)].iter().copied().collect();
        let tr: BTreeSet<usize> = nodes[split.max(1)..].iter().copied().collect();
        for depth in 1..=3 {
            let (sib, non) = g
                .sibling_split(
                    &zs.iter().map(|&i| id_of(&g, i)).collect(),
                    &tr.iter().map(|&i| id_of(&g, i)).collect(),
                    depth,
                )
                .unwrap();
            let want = sibling_oracle(&edges, &zs, &tr, depth);
            let got: BTreeSet<usize> = sib
                .iter()
                .map(|c| g.label(*c)[1..].parse().unwrap())
                .collect();
            assert_eq!(got, want, "case {case} depth {depth}");
            assert!(sib.is_disjoint(&non));
            assert_eq!(sib.len() + non.len(), zs.len());
        }
    }
}

fn dag_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (3usize..18, any::<u64>()).prop_map(|(n, seed)| {
        let mut r = rng(seed);
        (n, random_dag(&mut r, n, 3))
    })
}

proptest! {
    #[test]
    fn subsumer_sets_grow_with_depth((n, edges) in dag_strategy(), node in 0usize..18) {
        let node = node % n;
        let g = graph_from(&edges, n);
        let id = id_of(&g, node);
        let mut prev = BTreeSet::new();
        for depth in 1..=5 {
            let all = g.subsumers(id, depth).unwrap().all();
            prop_assert!(prev.is_subset(&all));
            prev = all;
        }
    }

    #[test]
    fn sibling_set_grows_with_share_depth((n, edges) in dag_strategy(), seed in any::<u64>()) {
        let g = graph_from(&edges, n);
        let mut r = rng(seed);
        use rand::Rng;
        let (mut zs, mut tr) = (BTreeSet::new(), BTreeSet::new());
        for i in 0..n {
            if r.random_bool(0.4) { zs.insert(id_of(&g, i)); } else { tr.insert(id_of(&g, i)); }
        }
        prop_assume!(!zs.is_empty() && !tr.is_empty());
        let mut prev = BTreeSet::new();
        for depth in 1..=4 {
            let (sib, non) = g.sibling_split(&zs, &tr, depth).unwrap();
            prop_assert!(prev.is_subset(&sib));
            prop_assert_eq!(sib.union(&non).copied().collect::<BTreeSet<_>>(), zs.clone());
            prev = sib;
        }
    }

    #[test]
    fn edge_list_round_trips((n, edges) in dag_strategy()) {
        let g = graph_from(&edges, n);
        let text = g.to_edge_list();
        let again = ConceptGraph::parse_edge_list(&text).unwrap();
        prop_assert_eq!(again.to_edge_list(), text);
        prop_assert_eq!(again.content_hash(), g.content_hash());
        prop_assert_eq!(again.len(), g.len());
    }
}
