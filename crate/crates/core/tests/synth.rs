use std::collections::{BTreeMap, BTreeSet};

use causal_cascade::synth::{
    gen_causal_dag, gen_groups, gen_social_graph, generate, group_sizes, inject_noise, plant_groups, CauseDensityBase,
    GeneratorConfig, GraphModel, Range, Trace,
};
use causal_cascade::{ingest, min_agony, NodeIx};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        observations: 300,
        seed,
        ..GeneratorConfig::default()
    }
}

fn weakly_connected(nodes: &[NodeIx], arcs: &[(NodeIx, NodeIx)]) -> bool {
    let set: BTreeSet<NodeIx> = nodes.iter().copied().collect();
    let mut seen = BTreeSet::from([nodes[0]]);
    let mut stack = vec![nodes[0]];
    while let Some(u) = stack.pop() {
        for &(a, b) in arcs {
            for (x, y) in [(a, b), (b, a)] {
                if x == u && set.contains(&y) && seen.insert(y) {
                    stack.push(y);
                }
            }
        }
    }
    seen.len() == set.len()
}

#[test]
fn same_seed_same_data() {
    let a = generate(&small(4)).unwrap();
    let b = generate(&small(4)).unwrap();
    assert_eq!(a, b);
    let c = generate(&small(5)).unwrap();
    assert_ne!(a.db, c.db);
}

#[test]
fn written_data_reingests_to_the_same_database() {
    let truth = generate(&small(8)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (obs, graph) = (dir.path().join("o.csv"), dir.path().join("g.txt"));
    causal_cascade::propagation::write_graph(&truth.graph, std::fs::File::create(&graph).unwrap()).unwrap();
    causal_cascade::propagation::write_observations(&truth.db, &truth.graph, std::fs::File::create(&obs).unwrap())
        .unwrap();
    let (g2, db2) = ingest(&obs, &graph).unwrap();
    assert_eq!(g2, truth.graph);
    assert_eq!(db2, truth.db);
}

#[test]
fn social_graph_edge_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let er = GeneratorConfig::default();
    let g = gen_social_graph(&er, 0.1, &mut rng).unwrap();
    // floor(0.1 * 4950) edges, both directions
    assert_eq!(g.arc_count(), 2 * 495);
    for (u, v) in g.arcs() {
        assert!(g.has_arc(v, u));
    }
    let pl = GeneratorConfig::power_law(0.05);
    let g = gen_social_graph(&pl, 0.05, &mut rng).unwrap();
    assert_eq!(g.arc_count(), 247);
    assert!(g.arcs().all(|(u, v)| u != v && !g.has_arc(v, u)));
}

#[test]
fn power_law_degrees_are_skewed() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pl = GeneratorConfig {
        n: 400,
        ..GeneratorConfig::power_law(0.05)
    };
    let g = gen_social_graph(&pl, 0.05, &mut rng).unwrap();
    let mut deg = vec![0usize; 400];
    for (u, v) in g.arcs() {
        deg[u as usize] += 1;
        deg[v as usize] += 1;
    }
    let mean = deg.iter().sum::<usize>() as f64 / 400.0;
    let max = *deg.iter().max().unwrap() as f64;
    // an ER graph of this density has max degree near mean + 4 sd
    assert!(max > 3.0 * mean, "max {max} mean {mean}");
}

#[test]
fn planted_groups_respect_their_bounds() {
    for seed in 0..10 {
        let config = small(seed);
        let truth = generate(&config).unwrap();
        assert_eq!(truth.groups.len(), config.k);
        let arcs: Vec<_> = truth.graph.arcs().collect();
        for g in &truth.groups {
            assert!((config.card_min..=config.card_max).contains(&g.len()));
            assert!(weakly_connected(g, &arcs));
        }
        for (i, a) in truth.groups.iter().enumerate() {
            for b in &truth.groups[i + 1..] {
                assert!(a.iter().filter(|v| b.contains(v)).count() <= config.card_overlap);
            }
        }
        for (dag, group) in truth.causal.iter().zip(&truth.groups) {
            assert_eq!(min_agony(&dag.digraph()).agony, 0);
            for &(u, v, p) in &dag.arcs {
                assert!(truth.graph.has_arc(u, v));
                assert!(group.contains(&u) && group.contains(&v));
                assert!(p > 0.0 && p < 1.0);
            }
        }
    }
}

#[test]
fn causal_density_is_relative_to_induced_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = GeneratorConfig {
        delta_cause: Range::fixed(0.5),
        ..GeneratorConfig::default()
    };
    let g = gen_social_graph(&config, 0.08, &mut rng).unwrap();
    let groups = gen_groups(&g, &config, &mut rng).unwrap();
    for group in &groups {
        let edges: BTreeSet<(NodeIx, NodeIx)> = g
            .arcs()
            .filter(|(u, v)| group.contains(u) && group.contains(v))
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        let dag = gen_causal_dag(group, &g, &config, &mut rng);
        let target = ((0.5 * edges.len() as f64).round() as usize).max(1);
        assert!(dag.arcs.len() <= target);
        assert!(!dag.arcs.is_empty());
    }
    let pairs = GeneratorConfig {
        cause_density_base: CauseDensityBase::Pairs,
        delta_cause: Range::fixed(0.01),
        ..config
    };
    for group in &groups {
        assert_eq!(gen_causal_dag(group, &g, &pairs, &mut rng).arcs.len(), 1);
    }
}

#[test]
fn every_user_acts_and_idles_in_each_group() {
    let config = GeneratorConfig { noise: 0.0, ..small(6) };
    let truth = generate(&config).unwrap();
    let mut active: BTreeMap<usize, Vec<BTreeSet<NodeIx>>> = BTreeMap::new();
    for (dag, &label) in truth.db.dags().iter().zip(&truth.labels) {
        active
            .entry(label)
            .or_default()
            .push(dag.nodes().iter().copied().collect());
    }
    for (g, sets) in active {
        for v in &truth.causal[g].nodes {
            let hits = sets.iter().filter(|s| s.contains(v)).count();
            assert!(
                hits > 0 && hits < sets.len(),
                "group {g} node {v}: {hits} of {}",
                sets.len()
            );
        }
    }
}

#[test]
fn noise_free_traces_follow_the_causal_law() {
    let config = GeneratorConfig { noise: 0.0, ..small(7) };
    let truth = generate(&config).unwrap();
    for (dag, &label) in truth.db.dags().iter().zip(&truth.labels) {
        let causal = &truth.causal[label];
        for &(v, t) in dag.activations() {
            assert!(causal.nodes.contains(&v));
            let parents: Vec<NodeIx> = causal.arcs.iter().filter(|a| a.1 == v).map(|a| a.0).collect();
            if !parents.is_empty() {
                assert!(
                    parents.iter().any(|&p| dag.time_of(p).is_some_and(|tp| tp < t)),
                    "node {v} fired without an earlier active parent"
                );
            }
        }
    }
}

#[test]
fn group_trace_counts_stay_in_the_size_window() {
    let config = GeneratorConfig {
        noise: 0.0,
        observations: 500,
        ..small(9)
    };
    let truth = generate(&config).unwrap();
    let mut counts = vec![0usize; config.k];
    for &l in &truth.labels {
        counts[l] += 1;
    }
    // |O| = 500, k = 10: between 25 and 75 traces each
    assert!(counts.iter().all(|&c| (25..=75).contains(&c)), "{counts:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        assert!(group_sizes(&config, &mut rng).iter().all(|&c| (25..=75).contains(&c)));
    }
}

#[test]
fn noise_rate_matches_its_parameter() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let config = GeneratorConfig::default();
    let g = gen_social_graph(&config, 0.08, &mut rng).unwrap();
    let groups = gen_groups(&g, &config, &mut rng).unwrap();
    let sizes = vec![200; config.k];
    let (_, traces) = plant_groups(&groups, &g, &sizes, &config, &mut rng).unwrap();
    let before: Vec<(usize, Trace)> = traces.clone();
    let (after, report) = inject_noise(traces, &groups, 0.1, &mut rng);
    let n = report.potential_entries as f64;
    let expected_entries: usize = before.iter().map(|(g, _)| groups[*g].len()).sum();
    assert_eq!(report.potential_entries, expected_entries);
    let rate = report.corrupted as f64 / n;
    // 5 standard deviations of a binomial proportion
    let sd = (0.1 * 0.9 / n).sqrt();
    assert!((rate - 0.1).abs() < 5.0 * sd, "rate {rate}");
    // an insert into a full trace or a delete from an empty one is a no-op
    assert!(report.inserted + report.deleted <= report.corrupted);
    let split = report.inserted as f64 / (report.inserted + report.deleted) as f64;
    assert!((split - 0.5).abs() < 0.1, "insert share {split}");
    assert_eq!(after.len() + report.dropped_traces, before.len());
}

#[test]
fn infeasible_group_layout_is_reported() {
    let config = GeneratorConfig {
        card_min: 12,
        card_max: 12,
        card_overlap: 0,
        ..small(0)
    };
    let err = generate(&config).unwrap_err();
    assert!(!err.is_input_error(), "{err}");
}

#[test]
fn models_parse_both_spellings() {
    assert_eq!("er".parse::<GraphModel>().unwrap(), GraphModel::ErdosRenyi);
    assert_eq!("power-law".parse::<GraphModel>().unwrap(), GraphModel::PowerLaw);
    assert!("lattice".parse::<GraphModel>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generated_data_is_consistent(seed in 0u64..1000, noise in 0.0f64..0.2) {
        let config = GeneratorConfig { observations: 120, noise, ..small(seed) };
        let truth = generate(&config).unwrap();
        prop_assert_eq!(truth.labels.len(), truth.db.len());
        prop_assert!(truth.labels.iter().all(|&l| l < config.k));
        prop_assert!(config.delta.lo <= truth.delta && truth.delta <= config.delta.hi);
        for (dag, &l) in truth.db.dags().iter().zip(&truth.labels) {
            prop_assert!(!dag.nodes().is_empty());
            prop_assert!(dag.nodes().iter().all(|v| truth.groups[l].contains(v)));
            prop_assert_eq!(min_agony(dag.graph()).agony, 0);
        }
    }
}
