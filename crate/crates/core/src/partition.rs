//! Agony-bounded partitioning of a propagation database.
//!
//! A group of propagation DAGs is *valid* when its union graph has agony at
//! most `eta`, it has at most `max_size` members and its union graph is weakly
//! connected. Two solvers are provided:
//!
//! * [`two_step_partition`]: level-wise mining of every valid group followed by
//!   greedy set cover restricted to groups disjoint from what is already
//!   covered. Exponential; guarded by [`PartitionParams::mining_limit`].
//! * [`sampling_partition`]: repeatedly samples maximal valid groups among the
//!   uncovered DAGs and accepts one once it covers at least
//!   `ceil(alpha * min(K, |uncovered|))` of them.
//!
//! A single DAG always forms a valid group, even when its own arc set is
//! disconnected: every trace hangs off the implicit external source, which
//! union graphs leave out.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agony::{min_agony_until, AgonyResult, Ranking};
use crate::error::{Error, Result};
use crate::graph::{Arc, Digraph, NodeIx, UnionFind};
use crate::propagation::{PropagationDag, PropagationDb};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    TwoStep,
    Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamWidth {
    Fixed(usize),
    /// `ceil(factor * log2(|uncovered| + 1))`
    Log(f64),
}

impl BeamWidth {
    fn width(self, uncovered: usize) -> usize {
        match self {
            BeamWidth::Fixed(w) => w.max(1),
            BeamWidth::Log(f) => ((f * ((uncovered + 1) as f64).log2()).ceil() as usize).max(1),
        }
    }
}

/// Individually switchable speed-ups for the sampling algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expedients {
    /// Emit DAGs that share no node with any other DAG as singletons upfront.
    pub drop_isolated: bool,
    /// Skip agony recomputation when the candidate adds no arc lying on a
    /// cycle of the extended union graph.
    pub skip_agony: bool,
    /// Wall-clock budget per agony computation; past it the solver returns an
    /// upper bound.
    #[serde(with = "opt_millis")]
    pub agony_deadline: Option<Duration>,
    /// Restrict each sampling round to a random subset of the uncovered DAGs.
    pub beam: Option<BeamWidth>,
    /// Failed sampling attempts tolerated per acceptance round before a random
    /// singleton is emitted. `None` uses `10 * ceil(1 / alpha)`.
    pub max_retries: Option<usize>,
    /// Once at most this many DAGs are uncovered, emit them as singletons.
    pub flush_below: Option<usize>,
}

impl Default for Expedients {
    fn default() -> Self {
        Expedients {
            drop_isolated: true,
            skip_agony: true,
            agony_deadline: None,
            beam: None,
            max_retries: None,
            flush_below: None,
        }
    }
}

mod opt_millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_some(&(d.as_millis() as u64)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Ok(Option::<u64>::deserialize(d)?.map(Duration::from_millis))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionParams {
    pub eta: u64,
    pub max_size: usize,
    pub alpha: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Largest database the two-step miner accepts.
    pub mining_limit: usize,
    pub expedients: Expedients,
}

impl Default for PartitionParams {
    fn default() -> Self {
        PartitionParams {
            eta: 0,
            max_size: 100,
            alpha: 0.1,
            seed: 0,
            algorithm: Algorithm::Sampling,
            mining_limit: 20,
            expedients: Expedients::default(),
        }
    }
}

impl PartitionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.max_size == 0 {
            return Err(Error::InvalidParam("max size K must be at least 1".into()));
        }
        Ok(())
    }

    fn retry_cap(&self) -> usize {
        self.expedients
            .max_retries
            .unwrap_or_else(|| 10 * (1.0 / self.alpha).ceil() as usize)
    }

    fn deadline(&self) -> Option<Instant> {
        self.expedients.agony_deadline.map(|d| Instant::now() + d)
    }

    /// `ceil(alpha * min(K, uncovered))`, at least 1.
    pub fn acceptance_threshold(&self, uncovered: usize) -> usize {
        let target = self.alpha * self.max_size.min(uncovered) as f64;
        // guard against 0.1 * 30 = 3.0000000000000004
        ((target - 1e-9).ceil() as usize).max(1)
    }
}

/// How a group entered the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupOrigin {
    Cover,
    Sampled,
    Isolated,
    RetryFallback,
    Flush,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    /// Positions into `PropagationDb::dags()`, ascending.
    pub members: Vec<usize>,
    pub union: Digraph,
    pub agony: u64,
    pub exact: bool,
    pub ranking: Ranking,
    pub connected: bool,
    pub origin: GroupOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    pub groups: Vec<Group>,
    pub params: PartitionParams,
}

impl GroupPartition {
    /// Group index of every DAG position.
    pub fn labels(&self, db_len: usize) -> Vec<usize> {
        let mut labels = vec![usize::MAX; db_len];
        for (g, group) in self.groups.iter().enumerate() {
            for &m in &group.members {
                labels[m] = g;
            }
        }
        labels
    }

    /// True iff the groups are disjoint and cover `0..db_len`.
    pub fn is_partition_of(&self, db_len: usize) -> bool {
        let mut seen = vec![false; db_len];
        for g in &self.groups {
            for &m in &g.members {
                if m >= db_len || seen[m] {
                    return false;
                }
                seen[m] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

fn union_of(db: &PropagationDb, members: &[usize]) -> Digraph {
    let dags = db.dags();
    Digraph::new(
        members.iter().flat_map(|&m| dags[m].nodes().iter().copied()),
        members.iter().flat_map(|&m| dags[m].arcs().iter().copied()),
    )
}

fn finish_group(db: &PropagationDb, members: Vec<usize>, params: &PartitionParams, origin: GroupOrigin) -> Group {
    let union = union_of(db, &members);
    let AgonyResult { agony, ranking, exact } = min_agony_until(&union, params.deadline());
    let connected = union.is_weakly_connected();
    Group {
        members,
        union,
        agony,
        exact,
        ranking,
        connected,
        origin,
    }
}

/// Checks the three group constraints. Singletons are always connected.
pub fn is_valid_group(db: &PropagationDb, members: &[usize], params: &PartitionParams) -> bool {
    if members.is_empty() || members.len() > params.max_size {
        return false;
    }
    let union = union_of(db, members);
    if members.len() > 1 && !union.is_weakly_connected() {
        return false;
    }
    min_agony_until(&union, None).agony <= params.eta
}

// ---------------------------------------------------------------------------
// two-step: mining + greedy set cover

/// Every group satisfying the agony and size constraints whose union is
/// weakly connected, found level-wise with agony-monotone pruning.
pub fn mine_valid_dag_sets(db: &PropagationDb, params: &PartitionParams) -> Result<Vec<Vec<usize>>> {
    params.validate()?;
    if db.len() > params.mining_limit {
        return Err(Error::MiningGuard {
            size: db.len(),
            limit: params.mining_limit,
        });
    }
    // singletons are DAGs: agony 0
    let mut level: Vec<Vec<usize>> = (0..db.len()).map(|i| vec![i]).collect();
    let mut all: Vec<Vec<usize>> = level.clone();
    let mut size = 1;
    while size < params.max_size && !level.is_empty() {
        let frequent: HashSet<&[usize]> = level.iter().map(|s| s.as_slice()).collect();
        let mut next = Vec::new();
        for (i, a) in level.iter().enumerate() {
            for b in &level[i + 1..] {
                if a[..size - 1] != b[..size - 1] {
                    // level is sorted lexicographically, so no later b matches
                    break;
                }
                let mut cand = a.clone();
                cand.push(b[size - 1]);
                let closed = (0..cand.len()).all(|skip| {
                    let sub: Vec<usize> = cand
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != skip)
                        .map(|(_, &x)| x)
                        .collect();
                    frequent.contains(sub.as_slice())
                });
                if closed && min_agony_until(&union_of(db, &cand), params.deadline()).agony <= params.eta {
                    next.push(cand);
                }
            }
        }
        next.sort();
        all.extend(next.iter().cloned());
        level = next;
        size += 1;
    }
    all.retain(|s| s.len() == 1 || union_of(db, s).is_weakly_connected());
    Ok(all)
}

/// Greedy set cover over the mined groups, picking at each step a largest
/// group with no already-covered member; ties go to the lexicographically
/// smallest list of entity ids.
pub fn two_step_partition(db: &PropagationDb, params: &PartitionParams) -> Result<GroupPartition> {
    let mut mined = mine_valid_dag_sets(db, params)?;
    let key = |s: &Vec<usize>| -> Vec<String> {
        let mut names: Vec<String> = s
            .iter()
            .map(|&m| db.entity_name(db.dags()[m].entity).to_owned())
            .collect();
        names.sort();
        names
    };
    // larger first, then by entity ids
    mined.sort_by_cached_key(|s| (std::cmp::Reverse(s.len()), key(s)));
    let mut covered = vec![false; db.len()];
    let mut groups = Vec::new();
    let mut remaining = db.len();
    while remaining > 0 {
        let pick = mined
            .iter()
            .find(|s| s.iter().all(|&m| !covered[m]))
            .expect("singletons are always mined")
            .clone();
        for &m in &pick {
            covered[m] = true;
        }
        remaining -= pick.len();
        groups.push(finish_group(db, pick, params, GroupOrigin::Cover));
    }
    Ok(GroupPartition {
        groups,
        params: params.clone(),
    })
}

// ---------------------------------------------------------------------------
// sampling

/// Incrementally grown union graph of the group being sampled.
struct GrowingUnion<'a> {
    dags: &'a [PropagationDag],
    in_union: Vec<bool>,
    node_count: usize,
    arcs: HashSet<Arc>,
    succ: HashMap<NodeIx, Vec<NodeIx>>,
    agony: u64,
    members: Vec<usize>,
    connected: bool,
    /// Component of each union node while the union is one disconnected DAG.
    comp_of: Vec<Option<usize>>,
    comp_count: usize,
}

enum Verdict {
    Admissible(u64),
    Disconnected,
    TooMuchAgony,
}

impl<'a> GrowingUnion<'a> {
    fn new(dags: &'a [PropagationDag], universe: usize) -> Self {
        GrowingUnion {
            dags,
            in_union: vec![false; universe],
            node_count: 0,
            arcs: HashSet::new(),
            succ: HashMap::new(),
            agony: 0,
            members: Vec::new(),
            connected: false,
            comp_of: Vec::new(),
            comp_count: 0,
        }
    }

    fn touches(&self, nodes: &[NodeIx]) -> bool {
        nodes.iter().any(|&v| self.in_union[v as usize])
    }

    fn connected_with(&self, d: usize, components: &[Vec<Vec<NodeIx>>]) -> bool {
        if self.members.is_empty() {
            return true;
        }
        if self.connected {
            return components[d].iter().all(|c| self.touches(c));
        }
        // the union is a single disconnected DAG: merge its components with
        // the candidate's through shared nodes
        let k = self.comp_count;
        let mut uf = UnionFind::new(k + components[d].len());
        for (j, comp) in components[d].iter().enumerate() {
            for &v in comp {
                if let Some(c) = self.comp_of[v as usize] {
                    uf.union(c, k + j);
                }
            }
        }
        uf.components() == 1
    }

    /// Is `target` reachable from `start` over the union arcs plus `extra`?
    fn reaches(&self, start: NodeIx, target: NodeIx, extra: &HashMap<NodeIx, Vec<NodeIx>>) -> bool {
        let mut seen: HashSet<NodeIx> = HashSet::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(u) = queue.pop_front() {
            let next = self
                .succ
                .get(&u)
                .into_iter()
                .flatten()
                .chain(extra.get(&u).into_iter().flatten());
            for &w in next {
                if w == target {
                    return true;
                }
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        false
    }

    fn agony_with(&self, d: usize, params: &PartitionParams) -> u64 {
        let dag = &self.dags[d];
        if self.members.is_empty() {
            return 0;
        }
        let new_arcs: Vec<Arc> = dag.arcs().iter().copied().filter(|a| !self.arcs.contains(a)).collect();
        if new_arcs.is_empty() {
            return self.agony;
        }
        if params.expedients.skip_agony {
            let mut extra: HashMap<NodeIx, Vec<NodeIx>> = HashMap::new();
            for &(u, v) in &new_arcs {
                extra.entry(u).or_default().push(v);
            }
            let on_cycle = new_arcs.iter().any(|&(u, v)| self.reaches(v, u, &extra));
            if !on_cycle {
                // arcs outside every cycle never enter an Eulerian subgraph
                return self.agony;
            }
            if params.eta == 0 && self.agony == 0 {
                return 1;
            }
        }
        let union = Digraph::new(
            (0..self.in_union.len() as NodeIx)
                .filter(|&v| self.in_union[v as usize])
                .chain(dag.nodes().iter().copied()),
            self.arcs.iter().copied().chain(dag.arcs().iter().copied()),
        );
        min_agony_until(&union, params.deadline()).agony
    }

    fn check(&self, d: usize, params: &PartitionParams, components: &[Vec<Vec<NodeIx>>]) -> Verdict {
        if !self.connected_with(d, components) {
            return Verdict::Disconnected;
        }
        let a = self.agony_with(d, params);
        if a <= params.eta {
            Verdict::Admissible(a)
        } else {
            Verdict::TooMuchAgony
        }
    }

    fn add(&mut self, d: usize, agony: u64, components: &[Vec<Vec<NodeIx>>]) {
        let dag = &self.dags[d];
        // any admitted second member leaves the union connected
        self.connected = !self.members.is_empty() || components[d].len() == 1;
        if !self.connected {
            self.comp_of = vec![None; self.in_union.len()];
            for (c, comp) in components[d].iter().enumerate() {
                for &v in comp {
                    self.comp_of[v as usize] = Some(c);
                }
            }
            self.comp_count = components[d].len();
        }
        for &v in dag.nodes() {
            if !self.in_union[v as usize] {
                self.in_union[v as usize] = true;
                self.node_count += 1;
            }
        }
        for &a in dag.arcs() {
            if self.arcs.insert(a) {
                self.succ.entry(a.0).or_default().push(a.1);
            }
        }
        self.agony = agony;
        self.members.push(d);
    }
}

/// Weak components of every DAG in the database.
fn dag_components(db: &PropagationDb) -> Vec<Vec<Vec<NodeIx>>> {
    db.dags()
        .iter()
        .map(|dag| {
            let nodes = dag.nodes();
            let mut uf = UnionFind::new(nodes.len());
            for &(u, v) in dag.arcs() {
                let (iu, iv) = (dag.graph().local_index(u).unwrap(), dag.graph().local_index(v).unwrap());
                uf.union(iu, iv);
            }
            let mut by_root: HashMap<usize, Vec<NodeIx>> = HashMap::new();
            for (i, &v) in nodes.iter().enumerate() {
                by_root.entry(uf.find(i)).or_default().push(v);
            }
            let mut comps: Vec<Vec<NodeIx>> = by_root.into_values().collect();
            comps.sort();
            comps
        })
        .collect()
}

fn universe_size(db: &PropagationDb) -> usize {
    db.dags()
        .iter()
        .flat_map(|d| d.nodes().iter().copied())
        .max()
        .map_or(0, |v| v as usize + 1)
}

/// Outcome of one call to the sampling subroutine.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGroup {
    pub members: Vec<usize>,
    /// Agony of the union as tracked while growing; equals the exact minimum
    /// unless an agony deadline was hit.
    pub tracked_agony: u64,
}

/// Grows one maximal admissible group out of `candidates` by uniform sampling
/// among the DAGs that keep the union connected and within the agony bound.
/// DAGs that break the agony bound are discarded for the rest of the call.
pub fn sample_maximal_dag_set(
    db: &PropagationDb,
    candidates: &[usize],
    uncovered: usize,
    params: &PartitionParams,
    rng: &mut impl Rng,
) -> SampledGroup {
    let components = dag_components(db);
    sample_with(db, candidates, uncovered, params, rng, &components, universe_size(db))
}

fn sample_with(
    db: &PropagationDb,
    candidates: &[usize],
    uncovered: usize,
    params: &PartitionParams,
    rng: &mut impl Rng,
    components: &[Vec<Vec<NodeIx>>],
    universe: usize,
) -> SampledGroup {
    let limit = params.max_size.min(uncovered);
    let mut union = GrowingUnion::new(db.dags(), universe);
    let mut pool: Vec<usize> = candidates.to_vec();
    while union.members.len() < limit && !pool.is_empty() {
        // scan the pool in random order; the first admissible DAG is uniform
        // among all admissible ones
        let mut live = pool.len();
        let mut picked = None;
        while live > 0 {
            let j = rng.gen_range(0..live);
            match union.check(pool[j], params, components) {
                Verdict::Admissible(a) => {
                    picked = Some((pool.swap_remove(j), a));
                    break;
                }
                Verdict::Disconnected => {
                    live -= 1;
                    pool.swap(j, live);
                }
                Verdict::TooMuchAgony => {
                    live -= 1;
                    pool.swap(j, live);
                    pool.swap_remove(live);
                }
            }
        }
        let Some((pick, agony)) = picked else {
            break;
        };
        union.add(pick, agony, components);
    }
    let mut members = union.members;
    members.sort_unstable();
    SampledGroup {
        members,
        tracked_agony: union.agony,
    }
}

/// Greedy partition by sampling maximal valid groups.
pub fn sampling_partition(db: &PropagationDb, params: &PartitionParams) -> Result<GroupPartition> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let components = dag_components(db);
    let universe = universe_size(db);
    let mut groups = Vec::new();
    let mut uncovered: BTreeSet<usize> = (0..db.len()).collect();

    if params.expedients.drop_isolated {
        let mut owners = vec![0usize; universe];
        for dag in db.dags() {
            for &v in dag.nodes() {
                owners[v as usize] += 1;
            }
        }
        for (i, dag) in db.dags().iter().enumerate() {
            if dag.nodes().iter().all(|&v| owners[v as usize] == 1) {
                uncovered.remove(&i);
                groups.push(finish_group(db, vec![i], params, GroupOrigin::Isolated));
            }
        }
    }

    let retry_cap = params.retry_cap();
    while !uncovered.is_empty() {
        if params.expedients.flush_below.is_some_and(|eps| uncovered.len() <= eps) {
            for &d in &uncovered {
                groups.push(finish_group(db, vec![d], params, GroupOrigin::Flush));
            }
            break;
        }
        let remaining: Vec<usize> = uncovered.iter().copied().collect();
        let threshold = params.acceptance_threshold(remaining.len());
        let mut accepted = None;
        for _ in 0..retry_cap {
            let candidates = match params.expedients.beam {
                Some(beam) => {
                    let w = beam.width(remaining.len()).min(remaining.len());
                    let mut c: Vec<usize> = remaining.choose_multiple(&mut rng, w).copied().collect();
                    c.sort_unstable();
                    c
                }
                None => remaining.clone(),
            };
            let sampled = sample_with(
                db,
                &candidates,
                remaining.len(),
                params,
                &mut rng,
                &components,
                universe,
            );
            if sampled.members.len() >= threshold {
                accepted = Some(sampled.members);
                break;
            }
        }
        let (members, origin) = match accepted {
            Some(m) => (m, GroupOrigin::Sampled),
            None => (vec![*remaining.choose(&mut rng).unwrap()], GroupOrigin::RetryFallback),
        };
        for m in &members {
            uncovered.remove(m);
        }
        groups.push(finish_group(db, members, params, origin));
    }
    Ok(GroupPartition {
        groups,
        params: params.clone(),
    })
}

/// Dispatches on `params.algorithm`.
pub fn partition(db: &PropagationDb, params: &PartitionParams) -> Result<GroupPartition> {
    match params.algorithm {
        Algorithm::TwoStep => two_step_partition(db, params),
        Algorithm::Sampling => sampling_partition(db, params),
    }
}
