#![allow(dead_code)]

use causal_cascade::partition::{is_valid_group, PartitionParams};
use causal_cascade::{Interner, Observation, PropagationDb, SocialGraph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random undirected social graph on `n` nodes and `traces` random traces,
/// each activating 1..=4 nodes with shuffled times.
pub fn random_db(seed: u64, n: u32, traces: usize) -> (SocialGraph, PropagationDb) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arcs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.5) {
                arcs.push((u, v));
                arcs.push((v, u));
            }
        }
    }
    let graph = SocialGraph::with_numbered_nodes(n as usize, arcs);
    let mut entities = Interner::new();
    let mut obs = Vec::new();
    for t in 0..traces {
        let e = entities.intern(&format!("e{t}"));
        let mut nodes: Vec<u32> = (0..n).collect();
        nodes.shuffle(&mut rng);
        let k = rng.gen_range(1..=4.min(n as usize));
        for (time, &v) in nodes[..k].iter().enumerate() {
            obs.push(Observation {
                node: v,
                entity: e,
                time: time as u64 + 1,
            });
        }
    }
    let db = PropagationDb::from_observations(entities, &obs, &graph).unwrap();
    (graph, db)
}

/// Every non-empty subset of `0..n` as a sorted member list.
pub fn all_subsets(n: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << n))
        .map(|mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect())
        .collect()
}

/// Size of the smallest partition into valid groups, by exhaustive search.
pub fn optimal_partition_size(db: &PropagationDb, params: &PartitionParams) -> usize {
    let n = db.len();
    let valid: Vec<bool> = (0u32..(1 << n))
        .map(|mask| {
            let members: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            !members.is_empty() && is_valid_group(db, &members, params)
        })
        .collect();
    // best[mask] = min blocks covering mask; blocks contain the lowest element
    let full = (1u32 << n) - 1;
    let mut best = vec![usize::MAX; 1 << n];
    best[0] = 0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let block = sub | low;
            if valid[block as usize] && best[(mask ^ block) as usize] != usize::MAX {
                best[mask as usize] = best[mask as usize].min(best[(mask ^ block) as usize] + 1);
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    best[full as usize]
}
