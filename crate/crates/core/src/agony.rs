//! Agony of a directed graph under a ranking, and its exact minimization.
//!
//! Under a ranking `r`, an arc `(u, v)` costs `max(r(u) - r(v) + 1, 0)`. The
//! minimum over all rankings is the LP dual of a maximum circulation with unit
//! arc capacities, i.e. the largest Eulerian subgraph. [`min_agony`] solves that
//! circulation with a primal-dual successive-shortest-path scheme: every arc
//! starts saturated, the resulting node imbalances are routed back through the
//! residual graph at unit cost per released arc, and the optimal node
//! potentials of the final residual graph are read off as the ranking.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Digraph, NodeIx};

/// Node to level assignment. Smaller ranks sit higher in the hierarchy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking(BTreeMap<NodeIx, u32>);

impl Ranking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: NodeIx) -> Option<u32> {
        self.0.get(&v).copied()
    }

    pub fn insert(&mut self, v: NodeIx, rank: u32) {
        self.0.insert(v, rank);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeIx, u32)> + '_ {
        self.0.iter().map(|(&v, &r)| (v, r))
    }

    /// Compresses the distinct rank values to `0..L` preserving order.
    /// Never increases agony.
    pub fn canonicalize(&self) -> Ranking {
        let mut levels: Vec<u32> = self.0.values().copied().collect();
        levels.sort_unstable();
        levels.dedup();
        Ranking(
            self.0
                .iter()
                .map(|(&v, r)| (v, levels.binary_search(r).unwrap() as u32))
                .collect(),
        )
    }

    /// Adds `c` to every rank.
    pub fn shifted(&self, c: u32) -> Ranking {
        Ranking(self.0.iter().map(|(&v, &r)| (v, r + c)).collect())
    }
}

impl FromIterator<(NodeIx, u32)> for Ranking {
    fn from_iter<I: IntoIterator<Item = (NodeIx, u32)>>(iter: I) -> Self {
        Ranking(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgonyResult {
    pub agony: u64,
    pub ranking: Ranking,
    /// False when the solver stopped at a deadline; `agony` is then an upper
    /// bound realized by `ranking`.
    pub exact: bool,
}

pub fn agony_of_ranking(g: &Digraph, r: &Ranking) -> Result<u64> {
    let mut total = 0u64;
    for &(u, v) in g.arcs() {
        let ru = r.get(u).ok_or(Error::MissingRank(u))? as i64;
        let rv = r.get(v).ok_or(Error::MissingRank(v))? as i64;
        total += (ru - rv + 1).max(0) as u64;
    }
    Ok(total)
}

pub fn min_agony(g: &Digraph) -> AgonyResult {
    min_agony_until(g, None)
}

/// Exact minimum agony, or an upper bound when `deadline` passes first.
pub fn min_agony_until(g: &Digraph, deadline: Option<Instant>) -> AgonyResult {
    let n = g.node_count();
    let arcs = g.local_arcs();
    let to_ranking = |local: &[u32]| -> Ranking {
        g.nodes()
            .iter()
            .zip(local)
            .map(|(&v, &r)| (v, r))
            .collect::<Ranking>()
            .canonicalize()
    };

    if let Some(levels) = longest_path_levels(n, &arcs) {
        return AgonyResult {
            agony: 0,
            ranking: to_ranking(&levels),
            exact: true,
        };
    }

    let mut flow = CirculationSolver::new(n, &arcs);
    match flow.solve(deadline) {
        Some(released) => {
            let ranking = to_ranking(&flow.ranking());
            let agony = arcs.len() as u64 - released;
            debug_assert_eq!(agony_of_ranking(g, &ranking).unwrap(), agony);
            AgonyResult {
                agony,
                ranking,
                exact: true,
            }
        }
        None => {
            let ranking = to_ranking(&greedy_order_ranks(n, &arcs));
            let agony = agony_of_ranking(g, &ranking).expect("total ranking");
            AgonyResult {
                agony,
                ranking,
                exact: false,
            }
        }
    }
}

pub const BRUTE_FORCE_MAX_NODES: usize = 7;

/// Exhaustive minimum over every map `V -> {0, .., |V|-1}`. Test oracle.
pub fn min_agony_bruteforce(g: &Digraph) -> Result<AgonyResult> {
    let n = g.node_count();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::BruteForceGuard {
            nodes: n,
            limit: BRUTE_FORCE_MAX_NODES,
        });
    }
    let arcs = g.local_arcs();
    let mut ranks = vec![0u32; n];
    let mut best = (u64::MAX, ranks.clone());
    loop {
        let a: u64 = arcs
            .iter()
            .map(|&(u, v)| (ranks[u] as i64 - ranks[v] as i64 + 1).max(0) as u64)
            .sum();
        if a < best.0 {
            best = (a, ranks.clone());
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == n {
                let ranking: Ranking = g.nodes().iter().copied().zip(best.1.iter().copied()).collect();
                return Ok(AgonyResult {
                    agony: if n == 0 { 0 } else { best.0 },
                    ranking: ranking.canonicalize(),
                    exact: true,
                });
            }
            ranks[i] += 1;
            if (ranks[i] as usize) < n {
                break;
            }
            ranks[i] = 0;
            i += 1;
        }
    }
}

/// Longest-path layering of a DAG; `None` if the graph has a cycle.
fn longest_path_levels(n: usize, arcs: &[(usize, usize)]) -> Option<Vec<u32>> {
    let mut indeg = vec![0usize; n];
    let mut out = vec![Vec::new(); n];
    for &(u, v) in arcs {
        out[u].push(v);
        indeg[v] += 1;
    }
    let mut level = vec![0u32; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(u) = queue.pop_front() {
        seen += 1;
        for &v in &out[u] {
            level[v] = level[v].max(level[u] + 1);
            indeg[v] -= 1;
            if indeg[v] == 0 {
                queue.push_back(v);
            }
        }
    }
    (seen == n).then_some(level)
}

/// Eades-Lin-Smyth ordering: peel sinks to the back and sources to the
/// front, otherwise move the node with the largest out-in degree difference
/// to the front. Ranks are positions in the order.
fn greedy_order_ranks(n: usize, arcs: &[(usize, usize)]) -> Vec<u32> {
    let mut out = vec![Vec::new(); n];
    let mut inc = vec![Vec::new(); n];
    for &(u, v) in arcs {
        out[u].push(v);
        inc[v].push(u);
    }
    let mut outdeg: Vec<i64> = out.iter().map(|a| a.len() as i64).collect();
    let mut indeg: Vec<i64> = inc.iter().map(|a| a.len() as i64).collect();
    let mut alive = vec![true; n];
    let mut front = Vec::new();
    let mut back = Vec::new();
    let mut remaining = n;
    let remove = |v: usize, alive: &mut Vec<bool>, outdeg: &mut Vec<i64>, indeg: &mut Vec<i64>| {
        alive[v] = false;
        for &w in &out[v] {
            indeg[w] -= 1;
        }
        for &w in &inc[v] {
            outdeg[w] -= 1;
        }
    };
    while remaining > 0 {
        if let Some(v) = (0..n).find(|&v| alive[v] && outdeg[v] == 0) {
            remove(v, &mut alive, &mut outdeg, &mut indeg);
            back.push(v);
        } else if let Some(v) = (0..n).find(|&v| alive[v] && indeg[v] == 0) {
            remove(v, &mut alive, &mut outdeg, &mut indeg);
            front.push(v);
        } else {
            let v = (0..n)
                .filter(|&v| alive[v])
                .max_by_key(|&v| (outdeg[v] - indeg[v], Reverse(v)))
                .unwrap();
            remove(v, &mut alive, &mut outdeg, &mut indeg);
            front.push(v);
        }
        remaining -= 1;
    }
    front.extend(back.into_iter().rev());
    let mut rank = vec![0u32; n];
    for (pos, &v) in front.iter().enumerate() {
        rank[v] = pos as u32;
    }
    rank
}

/// Residual network for the unit-capacity maximum circulation.
///
/// Arc `i = (u, v)` of the input becomes residual edge `2i` (`v -> u`, cost 1,
/// capacity 1: releasing the arc from the circulation) and its twin `2i + 1`
/// (`u -> v`, cost -1: putting it back). Imbalances are fed from a super source
/// and drained into a super sink.
struct CirculationSolver {
    n: usize,
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<i64>,
    source: usize,
    sink: usize,
    arc_edges: usize,
}

impl CirculationSolver {
    fn new(n: usize, arcs: &[(usize, usize)]) -> Self {
        let mut s = CirculationSolver {
            n,
            head: vec![Vec::new(); n + 2],
            to: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
            source: n,
            sink: n + 1,
            arc_edges: 2 * arcs.len(),
        };
        let mut excess = vec![0i64; n];
        for &(u, v) in arcs {
            s.link(v, u, 1, 1);
            excess[v] += 1;
            excess[u] -= 1;
        }
        for (v, &e) in excess.iter().enumerate() {
            if e > 0 {
                s.link(s.source, v, e, 0);
            } else if e < 0 {
                s.link(v, s.sink, -e, 0);
            }
        }
        s
    }

    fn link(&mut self, u: usize, v: usize, cap: i64, cost: i64) {
        self.head[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(cap);
        self.cost.push(cost);
        self.head[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0);
        self.cost.push(-cost);
    }

    /// Routes every imbalance at minimum cost. Returns the number of arcs
    /// released from the circulation, or `None` if the deadline passed.
    fn solve(&mut self, deadline: Option<Instant>) -> Option<u64> {
        let nodes = self.n + 2;
        let mut potential = vec![0i64; nodes];
        let mut total_cost = 0i64;
        let mut dist = vec![i64::MAX; nodes];
        let mut parent = vec![usize::MAX; nodes];
        loop {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return None;
            }
            dist.fill(i64::MAX);
            parent.fill(usize::MAX);
            dist[self.source] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0i64, self.source)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &e in &self.head[u] {
                    if self.cap[e] <= 0 {
                        continue;
                    }
                    let v = self.to[e];
                    let nd = d + self.cost[e] + potential[u] - potential[v];
                    if nd < dist[v] {
                        dist[v] = nd;
                        parent[v] = e;
                        heap.push(Reverse((nd, v)));
                    }
                }
            }
            if dist[self.sink] == i64::MAX {
                break;
            }
            for v in 0..nodes {
                if dist[v] != i64::MAX {
                    potential[v] += dist[v];
                }
            }
            let mut push = i64::MAX;
            let mut v = self.sink;
            while v != self.source {
                let e = parent[v];
                push = push.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = self.sink;
            while v != self.source {
                let e = parent[v];
                self.cap[e] -= push;
                self.cap[e ^ 1] += push;
                total_cost += push * self.cost[e];
                v = self.to[e ^ 1];
            }
        }
        debug_assert!(self.head[self.source].iter().all(|&e| self.cap[e] == 0));
        Some(total_cost as u64)
    }

    /// Ranks from shortest distances over the residual arcs of the original
    /// graph (Bellman-Ford from a virtual root at distance 0 to every node).
    fn ranking(&self) -> Vec<u32> {
        let mut dist = vec![0i64; self.n];
        let residual: Vec<(usize, usize, i64)> = (0..self.arc_edges)
            .filter(|&e| self.cap[e] > 0)
            .map(|e| (self.to[e ^ 1], self.to[e], self.cost[e]))
            .collect();
        for _ in 0..=self.n {
            let mut changed = false;
            for &(u, v, c) in &residual {
                if dist[u] + c < dist[v] {
                    dist[v] = dist[u] + c;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        // dist <= 0 everywhere since the root reaches every node at cost 0
        dist.iter().map(|&d| (-d) as u32).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(k: u32, offset: u32) -> Vec<(u32, u32)> {
        (0..k).map(|i| (offset + i, offset + (i + 1) % k)).collect()
    }

    #[test]
    fn dag_has_zero_agony() {
        let g = Digraph::from_arcs([(0, 1), (1, 2), (0, 2), (3, 2)]);
        let res = min_agony(&g);
        assert_eq!(res.agony, 0);
        assert!(res.exact);
        assert_eq!(agony_of_ranking(&g, &res.ranking).unwrap(), 0);
    }

    #[test]
    fn single_backward_arc_costs_rank_gap_plus_one() {
        let g = Digraph::from_arcs([(0, 1)]);
        let r: Ranking = [(0, 6), (1, 2)].into_iter().collect();
        assert_eq!(agony_of_ranking(&g, &r).unwrap(), 5);
        let flat: Ranking = [(0, 3), (1, 3)].into_iter().collect();
        assert_eq!(agony_of_ranking(&g, &flat).unwrap(), 1);
    }

    #[test]
    fn missing_rank_is_an_error() {
        let g = Digraph::from_arcs([(0, 1)]);
        let r: Ranking = [(0, 0)].into_iter().collect();
        assert!(matches!(agony_of_ranking(&g, &r), Err(Error::MissingRank(1))));
    }

    #[test]
    fn k_cycle_costs_k() {
        for k in 2..=8 {
            let mut arcs = cycle(k, 0);
            // a tail hanging off the cycle does not change anything
            arcs.push((0, 100));
            let g = Digraph::from_arcs(arcs);
            assert_eq!(min_agony(&g).agony, k as u64, "k = {k}");
        }
    }

    #[test]
    fn two_disjoint_two_cycles() {
        let g = Digraph::from_arcs([(0, 1), (1, 0), (2, 3), (3, 2), (1, 2)]);
        assert_eq!(min_agony(&g).agony, 4);
        assert_eq!(min_agony_bruteforce(&g).unwrap().agony, 4);
    }

    #[test]
    fn bruteforce_small_cases() {
        assert_eq!(
            min_agony_bruteforce(&Digraph::from_arcs([(0, 1), (1, 0)]))
                .unwrap()
                .agony,
            2
        );
        assert_eq!(min_agony_bruteforce(&Digraph::from_arcs([(0, 1)])).unwrap().agony, 0);
        let big = Digraph::from_arcs(cycle(8, 0));
        assert!(matches!(min_agony_bruteforce(&big), Err(Error::BruteForceGuard { .. })));
    }

    #[test]
    fn canonical_ranking_is_contiguous() {
        let r: Ranking = [(0, 10), (1, 4), (2, 10), (3, 7)].into_iter().collect();
        let c = r.canonicalize();
        assert_eq!(c.iter().collect::<Vec<_>>(), vec![(0, 2), (1, 0), (2, 2), (3, 1)]);
    }

    #[test]
    fn expired_deadline_gives_an_upper_bound() {
        let g = Digraph::from_arcs([(0, 1), (1, 2), (2, 0), (2, 3), (3, 2)]);
        let res = min_agony_until(&g, Some(Instant::now()));
        assert!(!res.exact);
        assert_eq!(agony_of_ranking(&g, &res.ranking).unwrap(), res.agony);
        assert!(res.agony >= min_agony(&g).agony);
    }
}
