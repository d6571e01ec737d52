use std::collections::BTreeSet;

use approx::assert_relative_eq;
use causal_cascade::eval::{arc_accuracy, group_pair_universe, mean_stdev, nmi};
use causal_cascade::pipeline::{aggregate, repeat_runs, RunConfig, RunSeeds};
use causal_cascade::synth::GeneratorConfig;
use causal_cascade::Arc;
use proptest::prelude::*;

/// Mutual information from a dense contingency table, normalized by the
/// arithmetic mean of the entropies.
fn nmi_oracle(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let n = a.len() as f64;
    let mut table = vec![vec![0.0; kb]; ka];
    for i in 0..a.len() {
        table[a[i]][b[i]] += 1.0 / n;
    }
    let pa: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let pb: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let h = |p: &[f64]| -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>();
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            if table[x][y] > 0.0 {
                mi += table[x][y] * (table[x][y] / (pa[x] * pb[y])).ln();
            }
        }
    }
    let (ha, hb) = (h(&pa), h(&pb));
    if ha == 0.0 && hb == 0.0 {
        1.0
    } else if ha == 0.0 || hb == 0.0 {
        0.0
    } else {
        mi / ((ha + hb) / 2.0)
    }
}

#[test]
fn nmi_hand_case() {
    // I = 0.5 ln(4/3) + 0.25 ln(2/3) + 0.25 ln 2, H = ln 2 and 0.5623
    let a = [0, 0, 1, 1];
    let b = [0, 0, 0, 1];
    let mi = 0.5 * (4.0f64 / 3.0).ln() + 0.25 * (2.0f64 / 3.0).ln() + 0.25 * 2.0f64.ln();
    let hb = -(0.75 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
    let expected = mi / ((2.0f64.ln() + hb) / 2.0);
    assert_relative_eq!(nmi(&a, &b).unwrap(), expected, epsilon = 1e-12);
    assert_relative_eq!(expected, 0.3437, epsilon = 1e-4);
}

#[test]
fn nmi_rejects_bad_input() {
    assert!(nmi(&[0, 1], &[0]).is_err());
    assert!(nmi(&[0], &[0]).is_err());
}

#[test]
fn accuracy_counts_partition_the_widened_universe() {
    let universe = group_pair_universe(&[vec![0, 1, 2]]);
    assert_eq!(universe.len(), 6);
    let truth: BTreeSet<Arc> = [(0, 1), (1, 2)].into();
    let learned: BTreeSet<Arc> = [(0, 1), (2, 1), (5, 6)].into();
    let (c, acc) = arc_accuracy(&truth, &learned, &universe).unwrap();
    assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1, 2, 1, 3));
    assert_eq!(c.total(), 7);
    assert_relative_eq!(acc, 4.0 / 7.0);
    assert!(arc_accuracy(&truth, &learned, &BTreeSet::new()).is_err());
}

#[test]
fn mean_and_sample_stdev() {
    let (m, s) = mean_stdev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
    assert_relative_eq!(m, 5.0);
    // sum of squares 32 over n - 1 = 7
    assert_relative_eq!(s, (32.0f64 / 7.0).sqrt());
    let (m, s) = mean_stdev(&[3.0]);
    assert_relative_eq!(m, 3.0);
    assert_eq!(s, 0.0);
}

#[test]
fn aggregate_matches_its_records() {
    let config = RunConfig {
        seed: 40,
        generator: GeneratorConfig {
            observations: 200,
            ..GeneratorConfig::default()
        },
        ..RunConfig::default()
    };
    let records = repeat_runs(&config, 3, 2).unwrap();
    assert_eq!(records.iter().map(|r| r.seed).collect::<Vec<_>>(), [40, 41, 42]);
    let agg = aggregate(&records);
    assert_eq!(agg.runs, 3);
    let psc: Vec<f64> = records.iter().map(|r| r.accuracy_psc).collect();
    assert_relative_eq!(agg.accuracy_psc.0, psc.iter().sum::<f64>() / 3.0, epsilon = 1e-12);
    let nmis: Vec<f64> = records.iter().map(|r| r.nmi).collect();
    assert_eq!(agg.nmi, mean_stdev(&nmis));

    // a batch member equals a single run of its seed
    let single = repeat_runs(&RunConfig { seed: 41, ..config }, 1, 1).unwrap();
    assert_eq!(single[0].accuracy_psc, records[1].accuracy_psc);
    assert_eq!(single[0].nmi, records[1].nmi);
}

#[test]
fn seed_split_is_stable_and_distinct() {
    let a = RunSeeds::split(9);
    assert_eq!(a, RunSeeds::split(9));
    assert_ne!(a, RunSeeds::split(10));
    assert!(a.gen != a.partition && a.partition != a.learn);
}

fn labelings() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (2usize..40).prop_flat_map(|n| (prop::collection::vec(0usize..5, n), prop::collection::vec(0usize..5, n)))
}

proptest! {
    #[test]
    fn nmi_matches_oracle((a, b) in labelings()) {
        let got = nmi(&a, &b).unwrap();
        prop_assert!((got - nmi_oracle(&a, &b)).abs() < 1e-9);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&got));
    }

    #[test]
    fn nmi_is_symmetric((a, b) in labelings()) {
        prop_assert!((nmi(&a, &b).unwrap() - nmi(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn nmi_ignores_label_names_and_item_order((a, b) in labelings(), shift in 1usize..100, rot in 0usize..40) {
        let base = nmi(&a, &b).unwrap();
        let renamed: Vec<usize> = a.iter().map(|x| (x * 7 + shift) % 1000).collect();
        prop_assert!((nmi(&renamed, &b).unwrap() - base).abs() < 1e-9);
        let k = rot % a.len();
        let (mut ra, mut rb) = (a.clone(), b.clone());
        ra.rotate_left(k);
        rb.rotate_left(k);
        prop_assert!((nmi(&ra, &rb).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn nmi_of_a_labeling_with_itself_is_one((a, _) in labelings()) {
        prop_assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn accuracy_is_one_iff_learned_equals_truth(
        groups in prop::collection::vec(prop::collection::btree_set(0u32..12, 2..6), 1..4),
        pick in prop::collection::vec(any::<bool>(), 200),
        flip in 0usize..200,
    ) {
        let groups: Vec<Vec<u32>> = groups.into_iter().map(|g| g.into_iter().collect()).collect();
        let universe = group_pair_universe(&groups);
        let truth: BTreeSet<Arc> = universe.iter().zip(pick.iter().cycle()).filter(|(_, &p)| p).map(|(&a, _)| a).collect();
        let (c, acc) = arc_accuracy(&truth, &truth, &universe).unwrap();
        prop_assert_eq!(acc, 1.0);
        prop_assert_eq!(c.total(), universe.len());
        let target = *universe.iter().nth(flip % universe.len()).unwrap();
        let mut learned = truth.clone();
        if !learned.remove(&target) {
            learned.insert(target);
        }
        let (c, acc) = arc_accuracy(&truth, &learned, &universe).unwrap();
        prop_assert_eq!(c.fp + c.fn_, 1);
        prop_assert!((acc - (1.0 - 1.0 / universe.len() as f64)).abs() < 1e-12);
    }
}
