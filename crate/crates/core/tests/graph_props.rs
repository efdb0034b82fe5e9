mod common;

use std::collections::BTreeSet;

use common::*;
use cuisim_core::graph::TraversalEdges;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bfs_matches_brute_force_distances(g in random_graph()) {
        prop_bfs_oracle(&g)?;
    }

    #[test]
    fn floyd_warshall_oracle_agrees_with_queue_bfs(g in random_graph()) {
        let fw = g.distances_from_seeds(TraversalEdges::Both);
        let queue = queue_distances(&g);
        // Seeds beyond the node range are isolated in both.
        prop_assert_eq!(fw, queue);
    }

    #[test]
    fn deeper_discovery_never_loses_nodes(g in random_graph()) {
        let graph = g.build();
        let seeds: BTreeSet<_> = g.seeds.iter().map(|s| c(*s)).collect();
        let mut previous = BTreeSet::new();
        for depth in 0..=10 {
            let r = cuisim_core::graph::bfs_discover(&graph, seeds.iter().copied(), depth, TraversalEdges::Both);
            prop_assert!(previous.is_subset(&r.reached));
            previous = r.reached;
        }
    }
}

#[test]
fn fixture_graph_structure() {
    let ing = ingest_fixture();
    let graph = cuisim_core::ConceptGraph::build(&ing.catalog, &cuisim_core::graph::default_synonym_relations());
    // Pulmonary edema sits under edema; the synonym chain links three opacities.
    let parents: Vec<_> = graph.parents(cui("C0034063")).collect();
    assert_eq!(parents, [cui("C0013604")]);
    assert!(graph.synonym_reachable(cui("C9000005"), cui("C9000008")));
    assert!(!graph.synonym_reachable(cui("C9000005"), cui("C0521530")));
    let stats = graph.stats();
    assert_eq!(stats.nodes, 32);
    // Aspirin, cough, fracture, chest radiograph, cardiomegaly, atelectasis
    // and the endotracheal tube have no kept relation.
    assert_eq!(stats.isolated_nodes, 7);
}
