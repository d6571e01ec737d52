use causal_cascade::agony::{agony_of_ranking, min_agony, min_agony_bruteforce, Ranking};
use causal_cascade::fixtures::three_traces;
use causal_cascade::partition::{is_valid_group, PartitionParams};
use causal_cascade::union_graph;

#[test]
fn first_trace_arcs() {
    let (graph, db) = three_traces();
    let d1 = &db.dags()[0];
    let named: Vec<(String, String)> = d1
        .arcs()
        .iter()
        .map(|&(u, v)| (graph.node_name(u).to_owned(), graph.node_name(v).to_owned()))
        .collect();
    let mut expected: Vec<(String, String)> = [("v2", "v3"), ("v3", "v4"), ("v4", "v5"), ("v2", "v4")]
        .iter()
        .map(|&(a, b)| (a.to_owned(), b.to_owned()))
        .collect();
    expected.sort();
    let mut named = named;
    named.sort();
    assert_eq!(named, expected);
    assert!(db.dags().iter().all(|d| d.graph().is_acyclic()));
}

#[test]
fn union_of_first_two_has_agony_five() {
    let (graph, db) = three_traces();
    let u = union_graph(&db.dags()[..2]).unwrap();
    assert!(!u.graph.is_acyclic());
    assert!(u.is_weakly_connected());
    assert_eq!(min_agony(&u.graph).agony, 5);

    // the ranking quoted for this union
    let quoted: Ranking = [
        ("v2", 0),
        ("v1", 1),
        ("v4", 2),
        ("v5", 3),
        ("v7", 4),
        ("v6", 5),
        ("v3", 6),
    ]
    .iter()
    .map(|&(n, r)| (graph.nodes.get(n).unwrap(), r))
    .collect();
    assert_eq!(agony_of_ranking(&u.graph, &quoted).unwrap(), 5);
}

#[test]
fn every_trace_alone_has_zero_agony() {
    let (_, db) = three_traces();
    for d in db.dags() {
        assert_eq!(min_agony(d.graph()).agony, 0);
        assert_eq!(min_agony_bruteforce(d.graph()).unwrap().agony, 0);
    }
}

#[test]
fn agony_bound_four_rejects_the_pair() {
    let (_, db) = three_traces();
    let params = PartitionParams {
        eta: 4,
        max_size: 3,
        ..Default::default()
    };
    assert!(!is_valid_group(&db, &[0, 1], &params));
    assert!(is_valid_group(
        &db,
        &[0],
        &PartitionParams {
            eta: 0,
            ..params.clone()
        }
    ));
    let five = PartitionParams { eta: 5, ..params };
    assert!(is_valid_group(&db, &[0, 1], &five));
}
