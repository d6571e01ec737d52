//! Small hand-built datasets used by tests, benches and the README.

use crate::propagation::{Interner, Observation, PropagationDb, SocialGraph};

/// Seven users and three entities. The social graph is undirected (every
/// edge is a pair of opposite arcs):
///
/// ```text
/// v1-v2 v2-v3 v2-v4 v3-v4 v4-v5 v1-v5 v5-v7 v6-v7 v3-v6 v2-v6 v4-v7
/// ```
///
/// Entity `phi1` reaches `v2 v3 v4 v5` at times 2, 4, 5, 7; `phi2` reaches
/// `v2 v1 v5 v7 v6 v3` at 1, 3, 6, 7, 8, 9; `phi3` reaches `v1 v2 v6 v7 v4` at
/// 1, 3, 5, 7, 8. The union of the first two traces contains the cycle
/// `v3 v4 v5 v7 v6` and has minimum agony 5.
pub fn three_traces() -> (SocialGraph, PropagationDb) {
    let edges = [
        (1, 2),
        (2, 3),
        (2, 4),
        (3, 4),
        (4, 5),
        (1, 5),
        (5, 7),
        (6, 7),
        (3, 6),
        (2, 6),
        (4, 7),
    ];
    let mut nodes = Interner::new();
    for i in 1..=7 {
        nodes.intern(&format!("v{i}"));
    }
    let arcs = edges.iter().flat_map(|&(a, b)| [(a - 1, b - 1), (b - 1, a - 1)]);
    let graph = SocialGraph::from_arcs(nodes, arcs);

    let traces: [(&str, &[(u32, u64)]); 3] = [
        ("phi1", &[(2, 2), (3, 4), (4, 5), (5, 7)]),
        ("phi2", &[(2, 1), (1, 3), (5, 6), (7, 7), (6, 8), (3, 9)]),
        ("phi3", &[(1, 1), (2, 3), (6, 5), (7, 7), (4, 8)]),
    ];
    let mut entities = Interner::new();
    let mut observations = Vec::new();
    for (name, acts) in traces {
        let entity = entities.intern(name);
        for &(v, time) in acts {
            observations.push(Observation {
                node: v - 1,
                entity,
                time,
            });
        }
    }
    let db = PropagationDb::from_observations(entities, &observations, &graph).expect("non-empty");
    (graph, db)
}
