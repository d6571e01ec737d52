//! Planted ground truth for synthetic experiments.
//!
//! A run draws a social graph, carves `k` weakly connected node groups out of
//! it, turns each group's induced subgraph into a causal DAG with arc
//! probabilities, samples propagation traces from those DAGs and finally
//! corrupts the observations with false positives and false negatives.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Arc, Digraph, NodeIx};
use crate::propagation::{EntityIx, Interner, Observation, PropagationDb, SocialGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphModel {
    ErdosRenyi,
    PowerLaw,
}

impl std::str::FromStr for GraphModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erdos-renyi" | "er" => Ok(GraphModel::ErdosRenyi),
            "power-law" | "pl" => Ok(GraphModel::PowerLaw),
            other => Err(Error::InvalidParam(format!("unknown graph model {other:?}"))),
        }
    }
}

impl std::fmt::Display for GraphModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GraphModel::ErdosRenyi => "erdos-renyi",
            GraphModel::PowerLaw => "power-law",
        })
    }
}

/// Closed interval sampled uniformly once per run; `lo == hi` pins a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn fixed(v: f64) -> Self {
        Range { lo: v, hi: v }
    }

    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }
}

impl std::fmt::Display for Range {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.hi > self.lo {
            write!(f, "{}:{}", self.lo, self.hi)
        } else {
            write!(f, "{}", self.lo)
        }
    }
}

impl std::str::FromStr for Range {
    type Err = Error;

    /// `0.05` or `0.05:0.1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("bad range {s:?}, expected `x` or `lo:hi`"));
        match s.split_once(':') {
            Some((a, b)) => {
                let (lo, hi) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                if lo > hi {
                    return Err(bad());
                }
                Ok(Range::new(lo, hi))
            }
            None => Ok(Range::fixed(s.parse().map_err(|_| bad())?)),
        }
    }
}

/// What `delta_cause` is a fraction of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CauseDensityBase {
    /// `|S| choose 2`.
    Pairs,
    /// Adjacent node pairs of the group's induced social subgraph.
    InducedEdges,
}

/// Where the per-arc activation probabilities come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArcProbabilities {
    /// Uniform in `[p_min, p_max]`.
    Within { p_min: f64, p_max: f64 },
    /// `p_min <= p_max` themselves drawn uniformly from (0, 1) per group.
    RandomBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub graph_model: GraphModel,
    /// Edges over `n choose 2`.
    pub delta: Range,
    /// Every edge becomes a pair of opposite arcs (otherwise one random
    /// direction).
    pub reciprocal: bool,
    pub k: usize,
    pub card_min: usize,
    pub card_max: usize,
    pub card_overlap: usize,
    /// Exponent on the number of links into the group when growing a group;
    /// 0 grows uniformly over the frontier.
    pub group_affinity: f64,
    /// Causal-DAG arcs over [`CauseDensityBase`].
    pub delta_cause: Range,
    pub cause_density_base: CauseDensityBase,
    pub arc_probabilities: ArcProbabilities,
    /// Number of traces; each group gets `observations / k * (1 +- width)`.
    pub observations: usize,
    pub size_window: f64,
    pub noise: f64,
    pub root_activation: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n: 100,
            graph_model: GraphModel::ErdosRenyi,
            delta: Range::new(0.05, 0.1),
            reciprocal: true,
            k: 10,
            card_min: 8,
            card_max: 12,
            card_overlap: 10,
            group_affinity: 4.0,
            delta_cause: Range::new(0.35, 0.5),
            cause_density_base: CauseDensityBase::InducedEdges,
            arc_probabilities: ArcProbabilities::RandomBounds,
            observations: 1000,
            size_window: 0.5,
            noise: 0.05,
            root_activation: 0.2,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    /// Directed power-law social graph of the given density, other settings
    /// default.
    pub fn power_law(delta: f64) -> Self {
        GeneratorConfig {
            graph_model: GraphModel::PowerLaw,
            delta: Range::fixed(delta),
            reciprocal: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.n < 2 {
            return bad(format!("need at least 2 nodes, got {}", self.n));
        }
        if !(self.delta.lo > 0.0 && self.delta.hi <= 1.0) {
            return bad(format!("density must lie in (0, 1], got {}", self.delta));
        }
        if !(0 < self.card_min && self.card_min <= self.card_max && self.card_max < self.n) {
            return bad(format!(
                "group sizes need 0 < card_min <= card_max < n, got {}..{} with n = {}",
                self.card_min, self.card_max, self.n
            ));
        }
        if self.card_overlap > self.card_max {
            return bad("card_overlap must not exceed card_max".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if let ArcProbabilities::Within { p_min, p_max } = self.arc_probabilities {
            if !(0.0 < p_min && p_min <= p_max && p_max < 1.0) {
                return bad(format!("need 0 < p_min <= p_max < 1, got {p_min}, {p_max}"));
            }
        }
        if !(0.0..1.0).contains(&self.noise) {
            return bad(format!("noise must lie in [0, 1), got {}", self.noise));
        }
        if !(0.0 < self.root_activation && self.root_activation <= 1.0) {
            return bad("root activation must lie in (0, 1]".into());
        }
        Ok(())
    }
}

/// Planted causal DAG of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalDag {
    pub nodes: Vec<NodeIx>,
    /// `(parent, child, P(child | parent))`
    pub arcs: Vec<(NodeIx, NodeIx, f64)>,
}

impl CausalDag {
    pub fn digraph(&self) -> Digraph {
        Digraph::new(self.nodes.iter().copied(), self.arcs.iter().map(|&(u, v, _)| (u, v)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub graph: SocialGraph,
    pub groups: Vec<Vec<NodeIx>>,
    pub causal: Vec<CausalDag>,
    /// Planted group of every DAG in `db` order.
    pub labels: Vec<usize>,
    pub db: PropagationDb,
    /// Density actually used for the social graph.
    pub delta: f64,
}

impl GroundTruth {
    /// Union of the planted causal arcs.
    pub fn causal_arcs(&self) -> BTreeSet<Arc> {
        self.causal
            .iter()
            .flat_map(|c| c.arcs.iter().map(|&(u, v, _)| (u, v)))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// step 1: social graph

/// Social graph with `floor(delta * n(n-1)/2)` edges.
pub fn gen_social_graph(config: &GeneratorConfig, delta: f64, rng: &mut impl Rng) -> Result<SocialGraph> {
    let n = config.n;
    if n < 2 {
        return Err(Error::InvalidParam("need at least 2 nodes".into()));
    }
    let pairs = n * (n - 1) / 2;
    let m = (delta * pairs as f64).floor() as usize;
    if delta <= 0.0 || m == 0 || m > pairs {
        return Err(Error::InvalidParam(format!(
            "density {delta} gives {m} edges on {n} nodes, need 1..={pairs}"
        )));
    }
    let edges = match config.graph_model {
        GraphModel::ErdosRenyi => erdos_renyi_edges(n, m, rng),
        GraphModel::PowerLaw => preferential_attachment_edges(n, m, rng),
    };
    let mut arcs = Vec::with_capacity(2 * edges.len());
    for (a, b) in edges {
        if config.reciprocal {
            arcs.push((a, b));
            arcs.push((b, a));
        } else if rng.gen_bool(0.5) {
            arcs.push((a, b));
        } else {
            arcs.push((b, a));
        }
    }
    Ok(SocialGraph::with_numbered_nodes(n, arcs))
}

/// `m` distinct unordered pairs chosen uniformly.
fn erdos_renyi_edges(n: usize, m: usize, rng: &mut impl Rng) -> Vec<(NodeIx, NodeIx)> {
    let mut chosen = BTreeSet::new();
    while chosen.len() < m {
        let a = rng.gen_range(0..n as NodeIx);
        let b = rng.gen_range(0..n as NodeIx);
        if a != b {
            chosen.insert((a.min(b), a.max(b)));
        }
    }
    chosen.into_iter().collect()
}

/// Preferential attachment: nodes arrive one by one and link to earlier nodes
/// with probability proportional to degree + 1. Edges per arrival are spread
/// so that the total is exactly `m`.
fn preferential_attachment_edges(n: usize, m: usize, rng: &mut impl Rng) -> Vec<(NodeIx, NodeIx)> {
    let mut degree = vec![0usize; n];
    let mut edges: BTreeSet<(NodeIx, NodeIx)> = BTreeSet::new();
    let mut owed = 0.0;
    let per_node = m as f64 / (n - 1) as f64;
    for t in 1..n {
        owed += per_node;
        let want = (owed.floor() as usize).min(t);
        owed -= want as f64;
        let mut targets = BTreeSet::new();
        while targets.len() < want {
            let total: usize = degree[..t].iter().map(|d| d + 1).sum();
            let mut x = rng.gen_range(0..total);
            let mut pick = 0;
            for (v, d) in degree[..t].iter().enumerate() {
                let w = d + 1;
                if x < w {
                    pick = v;
                    break;
                }
                x -= w;
            }
            targets.insert(pick);
        }
        for &v in &targets {
            degree[v] += 1;
            degree[t] += 1;
            edges.insert((v as NodeIx, t as NodeIx));
        }
    }
    // rounding leftovers: fill with degree-weighted extra edges
    while edges.len() < m {
        let a = rng.gen_range(0..n);
        let total: usize = degree.iter().map(|d| d + 1).sum();
        let mut x = rng.gen_range(0..total);
        let mut b = 0;
        for (v, d) in degree.iter().enumerate() {
            if x < d + 1 {
                b = v;
                break;
            }
            x -= d + 1;
        }
        if a != b && edges.insert((a.min(b) as NodeIx, a.max(b) as NodeIx)) {
            degree[a] += 1;
            degree[b] += 1;
        }
    }
    edges.into_iter().collect()
}

// ---------------------------------------------------------------------------
// step 2: groups

const GROUP_RETRIES: usize = 1000;

fn undirected_neighbors(graph: &SocialGraph) -> Vec<Vec<NodeIx>> {
    let mut nb: Vec<BTreeSet<NodeIx>> = vec![BTreeSet::new(); graph.node_count()];
    for (u, v) in graph.arcs() {
        nb[u as usize].insert(v);
        nb[v as usize].insert(u);
    }
    nb.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// `k` weakly connected groups with sizes in `[card_min, card_max]` and
/// pairwise overlap at most `card_overlap`. Groups grow from a random seed by
/// adding frontier nodes, preferring nodes not yet in any group and nodes with
/// many links into the group.
pub fn gen_groups(graph: &SocialGraph, config: &GeneratorConfig, rng: &mut impl Rng) -> Result<Vec<Vec<NodeIx>>> {
    let nb = undirected_neighbors(graph);
    let n = graph.node_count();
    let mut used = vec![false; n];
    let mut groups: Vec<Vec<NodeIx>> = Vec::with_capacity(config.k);
    for _ in 0..config.k {
        let mut accepted = None;
        for _ in 0..GROUP_RETRIES {
            let size = rng.gen_range(config.card_min..=config.card_max);
            let fresh: Vec<NodeIx> = (0..n as NodeIx).filter(|&v| !used[v as usize]).collect();
            let seed = if fresh.is_empty() {
                rng.gen_range(0..n as NodeIx)
            } else {
                *fresh.choose(rng).unwrap()
            };
            let Some(group) = grow_group(seed, size, &nb, &used, config.group_affinity, rng) else {
                continue;
            };
            let members: HashSet<NodeIx> = group.iter().copied().collect();
            if groups
                .iter()
                .all(|g| g.iter().filter(|v| members.contains(v)).count() <= config.card_overlap)
            {
                accepted = Some(group);
                break;
            }
        }
        let group = accepted.ok_or_else(|| {
            Error::Infeasible(format!(
                "could not place group {} of {} after {GROUP_RETRIES} attempts; loosen the size or overlap bounds",
                groups.len() + 1,
                config.k
            ))
        })?;
        for &v in &group {
            used[v as usize] = true;
        }
        groups.push(group);
    }
    Ok(groups)
}

fn grow_group(
    seed: NodeIx,
    size: usize,
    nb: &[Vec<NodeIx>],
    used: &[bool],
    affinity: f64,
    rng: &mut impl Rng,
) -> Option<Vec<NodeIx>> {
    let mut group: BTreeSet<NodeIx> = BTreeSet::from([seed]);
    let mut links: HashMap<NodeIx, usize> = HashMap::new();
    let add_links = |v: NodeIx, links: &mut HashMap<NodeIx, usize>, group: &BTreeSet<NodeIx>| {
        for &w in &nb[v as usize] {
            if !group.contains(&w) {
                *links.entry(w).or_default() += 1;
            }
        }
    };
    add_links(seed, &mut links, &group);
    while group.len() < size {
        let mut frontier: Vec<(NodeIx, usize)> = links.iter().map(|(&v, &c)| (v, c)).collect();
        if frontier.is_empty() {
            return None;
        }
        frontier.sort_unstable();
        if frontier.iter().any(|&(v, _)| !used[v as usize]) {
            frontier.retain(|&(v, _)| !used[v as usize]);
        }
        let weights: Vec<f64> = frontier.iter().map(|&(_, c)| (c as f64).powf(affinity)).collect();
        let total: f64 = weights.iter().sum();
        let mut x = rng.gen::<f64>() * total;
        let mut pick = frontier[frontier.len() - 1].0;
        for (&(v, _), w) in frontier.iter().zip(&weights) {
            if x < *w {
                pick = v;
                break;
            }
            x -= w;
        }
        group.insert(pick);
        links.remove(&pick);
        add_links(pick, &mut links, &group);
    }
    Some(group.into_iter().collect())
}

// ---------------------------------------------------------------------------
// step 3: causal DAGs

/// The group's induced social subgraph, with arcs inserted in random
/// order and skipped whenever they would close a cycle, then randomly thinned
/// to `delta_cause` times the size of the configured base. Every kept arc then gets a
/// probability from [`draw_probabilities`].
pub fn gen_causal_dag(
    group: &[NodeIx],
    graph: &SocialGraph,
    config: &GeneratorConfig,
    rng: &mut impl Rng,
) -> CausalDag {
    let members: HashSet<NodeIx> = group.iter().copied().collect();
    let mut induced: Vec<Arc> = group
        .iter()
        .flat_map(|&u| graph.successors(u).iter().map(move |&v| (u, v)))
        .filter(|(_, v)| members.contains(v))
        .collect();
    let base = match config.cause_density_base {
        CauseDensityBase::Pairs => group.len() * (group.len() - 1) / 2,
        CauseDensityBase::InducedEdges => induced
            .iter()
            .map(|&(u, v)| (u.min(v), u.max(v)))
            .collect::<HashSet<_>>()
            .len(),
    };
    induced.shuffle(rng);
    let mut kept: Vec<Arc> = Vec::new();
    let mut reach = Reachability::new(group);
    for (u, v) in induced {
        if !reach.reaches(v, u) {
            reach.add(u, v);
            kept.push((u, v));
        }
    }
    let target = (config.delta_cause.sample(rng) * base as f64).round() as usize;
    kept.shuffle(rng);
    kept.truncate(target.max(1));
    kept.sort_unstable();
    let mut dag = CausalDag {
        nodes: group.to_vec(),
        arcs: kept.into_iter().map(|(u, v)| (u, v, 0.0)).collect(),
    };
    draw_probabilities(&mut dag, config.arc_probabilities, rng);
    dag
}

/// Redraws every arc probability of `dag`; with random bounds the bounds are
/// drawn first, once for the whole DAG.
pub fn draw_probabilities(dag: &mut CausalDag, source: ArcProbabilities, rng: &mut impl Rng) {
    let (lo, hi) = match source {
        ArcProbabilities::Within { p_min, p_max } => (p_min, p_max),
        ArcProbabilities::RandomBounds => {
            let (a, b): (f64, f64) = (rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99));
            (a.min(b), a.max(b))
        }
    };
    for arc in &mut dag.arcs {
        arc.2 = rng.gen_range(lo..=hi);
    }
}

struct Reachability {
    succ: HashMap<NodeIx, Vec<NodeIx>>,
}

impl Reachability {
    fn new(nodes: &[NodeIx]) -> Self {
        Reachability {
            succ: nodes.iter().map(|&v| (v, Vec::new())).collect(),
        }
    }

    fn add(&mut self, u: NodeIx, v: NodeIx) {
        self.succ.entry(u).or_default().push(v);
    }

    fn reaches(&self, from: NodeIx, to: NodeIx) -> bool {
        let mut stack = vec![from];
        let mut seen = HashSet::from([from]);
        while let Some(x) = stack.pop() {
            if x == to {
                return true;
            }
            for &y in self.succ.get(&x).into_iter().flatten() {
                if seen.insert(y) {
                    stack.push(y);
                }
            }
        }
        false
    }
}

// ---------------------------------------------------------------------------
// step 4: traces

/// One sampled trace: `(node, time)` with distinct times `1..=len`.
pub type Trace = Vec<(NodeIx, u64)>;

const TRACE_RETRIES: usize = 1000;

/// Probability that a node with the given active-parent arc probabilities
/// fires: parents act independently.
pub fn noisy_or(active_parent_probs: &[f64]) -> f64 {
    1.0 - active_parent_probs.iter().map(|p| 1.0 - p).product::<f64>()
}

struct Sampler<'a> {
    order: Vec<NodeIx>,
    parents: HashMap<NodeIx, Vec<(NodeIx, f64)>>,
    dag: &'a CausalDag,
}

impl<'a> Sampler<'a> {
    fn new(dag: &'a CausalDag) -> Self {
        let order = dag.digraph().topological_order().expect("causal DAG is acyclic");
        let mut parents: HashMap<NodeIx, Vec<(NodeIx, f64)>> = HashMap::new();
        for &(u, v, p) in &dag.arcs {
            parents.entry(v).or_default().push((u, p));
        }
        Sampler { order, parents, dag }
    }

    /// Active set of one trace under the noise-free law, non-empty.
    fn sample_active(&self, root_activation: f64, rng: &mut impl Rng) -> BTreeSet<NodeIx> {
        loop {
            let mut active = BTreeSet::new();
            for &v in &self.order {
                let fire = match self.parents.get(&v) {
                    None => rng.gen_bool(root_activation),
                    Some(ps) => {
                        let probs: Vec<f64> = ps.iter().filter(|(u, _)| active.contains(u)).map(|&(_, p)| p).collect();
                        !probs.is_empty() && rng.gen_bool(noisy_or(&probs))
                    }
                };
                if fire {
                    active.insert(v);
                }
            }
            if !active.is_empty() {
                return active;
            }
        }
    }

    /// Distinct times `1..=|active|` along a random linear extension of the
    /// causal order restricted to the active nodes.
    fn assign_times(&self, active: &BTreeSet<NodeIx>, rng: &mut impl Rng) -> Trace {
        let mut indeg: HashMap<NodeIx, usize> = active.iter().map(|&v| (v, 0)).collect();
        let mut succ: HashMap<NodeIx, Vec<NodeIx>> = HashMap::new();
        for &(u, v, _) in &self.dag.arcs {
            if active.contains(&u) && active.contains(&v) {
                *indeg.get_mut(&v).unwrap() += 1;
                succ.entry(u).or_default().push(v);
            }
        }
        let mut ready: Vec<NodeIx> = active.iter().copied().filter(|v| indeg[v] == 0).collect();
        let mut trace = Vec::with_capacity(active.len());
        let mut t = 0;
        while !ready.is_empty() {
            let i = rng.gen_range(0..ready.len());
            let v = ready.swap_remove(i);
            t += 1;
            trace.push((v, t));
            for &w in succ.get(&v).into_iter().flatten() {
                let d = indeg.get_mut(&w).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(w);
                }
            }
            ready.sort_unstable();
        }
        trace
    }
}

/// Per-group trace counts uniform in `observations / k * (1 +- size_window)`.
pub fn group_sizes(config: &GeneratorConfig, rng: &mut impl Rng) -> Vec<usize> {
    let mean = config.observations as f64 / config.k as f64;
    let lo = (mean * (1.0 - config.size_window)).ceil().max(1.0) as usize;
    let hi = ((mean * (1.0 + config.size_window)).floor() as usize).max(lo);
    (0..config.k).map(|_| rng.gen_range(lo..=hi)).collect()
}

/// Planted DAGs and the group-labelled traces drawn from them.
pub type Planted = (Vec<CausalDag>, Vec<(usize, Trace)>);

/// Plants one causal DAG per group and samples its traces. A group's DAG and
/// trace set are redrawn together until every group node is active in at
/// least one trace and inactive in at least one.
pub fn plant_groups(
    groups: &[Vec<NodeIx>],
    graph: &SocialGraph,
    sizes: &[usize],
    config: &GeneratorConfig,
    rng: &mut impl Rng,
) -> Result<Planted> {
    let mut causal = Vec::with_capacity(groups.len());
    let mut out = Vec::new();
    for (g, (group, &size)) in groups.iter().zip(sizes).enumerate() {
        let mut accepted = None;
        for _ in 0..TRACE_RETRIES {
            let dag = gen_causal_dag(group, graph, config, rng);
            let sampler = Sampler::new(&dag);
            let sets: Vec<BTreeSet<NodeIx>> = (0..size)
                .map(|_| sampler.sample_active(config.root_activation, rng))
                .collect();
            let ok = dag.nodes.iter().all(|v| {
                let hits = sets.iter().filter(|s| s.contains(v)).count();
                hits > 0 && hits < sets.len()
            });
            if ok {
                let traces: Vec<Trace> = sets.iter().map(|s| sampler.assign_times(s, rng)).collect();
                accepted = Some((dag, traces));
                break;
            }
        }
        let (dag, traces) = accepted.ok_or_else(|| {
            Error::Infeasible(format!(
                "group {g}: no draw within {TRACE_RETRIES} attempts has every user both acting and idle"
            ))
        })?;
        out.extend(traces.into_iter().map(|t| (g, t)));
        causal.push(dag);
    }
    Ok((causal, out))
}

/// Statistics of one noise pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NoiseReport {
    pub potential_entries: usize,
    pub corrupted: usize,
    pub inserted: usize,
    pub deleted: usize,
    pub dropped_traces: usize,
}

/// Every (trace, group node) entry is corrupted with probability `noise`; a
/// corruption is a fair coin between inserting an absent group node at a
/// random position and deleting a random present one. Traces left empty are
/// dropped.
pub fn inject_noise(
    traces: Vec<(usize, Trace)>,
    groups: &[Vec<NodeIx>],
    noise: f64,
    rng: &mut impl Rng,
) -> (Vec<(usize, Trace)>, NoiseReport) {
    let mut report = NoiseReport::default();
    let mut out = Vec::with_capacity(traces.len());
    for (g, mut trace) in traces {
        let entries = groups[g].len();
        report.potential_entries += entries;
        if noise > 0.0 {
            for _ in 0..entries {
                if !rng.gen_bool(noise) {
                    continue;
                }
                report.corrupted += 1;
                if rng.gen_bool(0.5) {
                    let absent: Vec<NodeIx> = groups[g]
                        .iter()
                        .copied()
                        .filter(|v| trace.iter().all(|(w, _)| w != v))
                        .collect();
                    if let Some(&v) = absent.choose(rng) {
                        let t = rng.gen_range(1..=trace.len() as u64 + 1);
                        for e in trace.iter_mut() {
                            if e.1 >= t {
                                e.1 += 1;
                            }
                        }
                        trace.push((v, t));
                        report.inserted += 1;
                    }
                } else if !trace.is_empty() {
                    let i = rng.gen_range(0..trace.len());
                    trace.remove(i);
                    report.deleted += 1;
                }
            }
        }
        if trace.is_empty() {
            log::debug!("trace of group {g} emptied by noise, dropped");
            report.dropped_traces += 1;
            continue;
        }
        trace.sort_by_key(|&(_, t)| t);
        out.push((g, trace));
    }
    (out, report)
}

/// Runs all four steps plus noise.
pub fn generate(config: &GeneratorConfig) -> Result<GroundTruth> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let delta = config.delta.sample(&mut rng);
    let graph = gen_social_graph(config, delta, &mut rng)?;
    let groups = gen_groups(&graph, config, &mut rng)?;
    let sizes = group_sizes(config, &mut rng);
    let (causal, traces) = plant_groups(&groups, &graph, &sizes, config, &mut rng)?;
    let (mut traces, report) = inject_noise(traces, &groups, config.noise, &mut rng);
    if report.dropped_traces > 0 {
        log::info!("{} traces emptied by noise and dropped", report.dropped_traces);
    }
    traces.shuffle(&mut rng);

    let mut entities = Interner::new();
    let mut observations = Vec::new();
    let mut labels = Vec::with_capacity(traces.len());
    for (i, (g, trace)) in traces.iter().enumerate() {
        let e: EntityIx = entities.intern(&format!("e{i}"));
        labels.push(*g);
        observations.extend(trace.iter().map(|&(node, time)| Observation { node, entity: e, time }));
    }
    let db = PropagationDb::from_observations(entities, &observations, &graph)?;
    debug_assert_eq!(db.len(), labels.len());
    Ok(GroundTruth {
        graph,
        groups,
        causal,
        labels,
        db,
        delta,
    })
}
