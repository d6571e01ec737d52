//! Observations, the social graph, per-entity propagation DAGs and their
//! union graphs.
//!
//! Every propagation is implicitly started by an external source at time 0.
//! That source is never materialized: the first activations of a trace simply
//! have no incoming arc, and union graphs never see it.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Arc, Digraph, NodeIx};

pub type EntityIx = u32;

/// Bijection between external string ids and dense indices `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&ix) = self.index.get(name) {
            return ix;
        }
        let ix = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), ix);
        ix
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, ix: u32) -> &str {
        &self.names[ix as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One `<node, entity, time>` activation event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Observation {
    pub node: NodeIx,
    pub entity: EntityIx,
    pub time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialGraph {
    pub nodes: Interner,
    out: Vec<Vec<NodeIx>>,
    arc_count: usize,
}

impl SocialGraph {
    /// Builds a graph over `nodes`; self-loops and duplicate arcs are dropped.
    pub fn from_arcs(nodes: Interner, arcs: impl IntoIterator<Item = Arc>) -> Self {
        let mut out = vec![Vec::new(); nodes.len()];
        for (u, v) in arcs {
            if u != v {
                out[u as usize].push(v);
            }
        }
        let mut arc_count = 0;
        for adj in &mut out {
            adj.sort_unstable();
            adj.dedup();
            arc_count += adj.len();
        }
        SocialGraph { nodes, out, arc_count }
    }

    /// Graph over nodes named `v0..v{n-1}`.
    pub fn with_numbered_nodes(n: usize, arcs: impl IntoIterator<Item = Arc>) -> Self {
        let mut nodes = Interner::new();
        for i in 0..n {
            nodes.intern(&format!("v{i}"));
        }
        Self::from_arcs(nodes, arcs)
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arc_count
    }

    pub fn successors(&self, u: NodeIx) -> &[NodeIx] {
        &self.out[u as usize]
    }

    pub fn has_arc(&self, u: NodeIx, v: NodeIx) -> bool {
        self.out[u as usize].binary_search(&v).is_ok()
    }

    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(u, adj)| adj.iter().map(move |&v| (u as NodeIx, v)))
    }

    pub fn node_name(&self, v: NodeIx) -> &str {
        self.nodes.name(v)
    }
}

/// The DAG left by one entity over the social graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropagationDag {
    pub entity: EntityIx,
    /// `(node, time)` sorted by node.
    activations: Vec<(NodeIx, u64)>,
    graph: Digraph,
}

impl PropagationDag {
    pub fn graph(&self) -> &Digraph {
        &self.graph
    }

    pub fn nodes(&self) -> &[NodeIx] {
        self.graph.nodes()
    }

    pub fn arcs(&self) -> &[Arc] {
        self.graph.arcs()
    }

    pub fn activations(&self) -> &[(NodeIx, u64)] {
        &self.activations
    }

    pub fn time_of(&self, v: NodeIx) -> Option<u64> {
        self.activations
            .binary_search_by_key(&v, |&(n, _)| n)
            .ok()
            .map(|i| self.activations[i].1)
    }

    pub fn is_active(&self, v: NodeIx) -> bool {
        self.activations.binary_search_by_key(&v, |&(n, _)| n).is_ok()
    }
}

/// Builds the propagation DAG of one entity: the social arcs between
/// activated nodes whose activation times strictly increase. Repeated
/// observations of a node keep the earliest time.
pub fn derive_dag(entity: EntityIx, observations: &[(NodeIx, u64)], graph: &SocialGraph) -> PropagationDag {
    let mut first: HashMap<NodeIx, u64> = HashMap::new();
    for &(v, t) in observations {
        first.entry(v).and_modify(|old| *old = (*old).min(t)).or_insert(t);
    }
    let mut activations: Vec<(NodeIx, u64)> = first.into_iter().collect();
    activations.sort_unstable();

    let time: HashMap<NodeIx, u64> = activations.iter().copied().collect();
    let mut arcs = Vec::new();
    for &(u, tu) in &activations {
        for &v in graph.successors(u) {
            if let Some(&tv) = time.get(&v) {
                if tu < tv {
                    arcs.push((u, v));
                }
            }
        }
    }
    let dag = Digraph::new(activations.iter().map(|&(v, _)| v), arcs);
    debug_assert!(dag.is_acyclic());
    PropagationDag {
        entity,
        activations,
        graph: dag,
    }
}

/// Database of propagations, one DAG per entity in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropagationDb {
    pub entities: Interner,
    dags: Vec<PropagationDag>,
}

impl PropagationDb {
    /// Groups observations by entity and derives one DAG per entity.
    pub fn from_observations(entities: Interner, observations: &[Observation], graph: &SocialGraph) -> Result<Self> {
        let mut per_entity: Vec<Vec<(NodeIx, u64)>> = vec![Vec::new(); entities.len()];
        for o in observations {
            per_entity[o.entity as usize].push((o.node, o.time));
        }
        let dags: Vec<PropagationDag> = per_entity
            .iter()
            .enumerate()
            .filter(|(_, obs)| !obs.is_empty())
            .map(|(e, obs)| derive_dag(e as EntityIx, obs, graph))
            .collect();
        if dags.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        Ok(PropagationDb { entities, dags })
    }

    pub fn dags(&self) -> &[PropagationDag] {
        &self.dags
    }

    pub fn len(&self) -> usize {
        self.dags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dags.is_empty()
    }

    pub fn entity_name(&self, e: EntityIx) -> &str {
        self.entities.name(e)
    }

    /// Position in `dags()` of the DAG for each entity id.
    pub fn position_of(&self, name: &str) -> Option<usize> {
        let e = self.entities.get(name)?;
        self.dags.binary_search_by_key(&e, |d| d.entity).ok()
    }

    pub fn observation_count(&self) -> usize {
        self.dags.iter().map(|d| d.activations.len()).sum()
    }
}

/// Union of a group of propagation DAGs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnionGraph {
    pub graph: Digraph,
    pub members: Vec<EntityIx>,
}

impl UnionGraph {
    pub fn is_weakly_connected(&self) -> bool {
        self.graph.is_weakly_connected()
    }
}

/// Set union of the node and arc sets of `group`.
pub fn union_graph<'a>(group: impl IntoIterator<Item = &'a PropagationDag>) -> Result<UnionGraph> {
    let mut nodes = Vec::new();
    let mut arcs = Vec::new();
    let mut members = Vec::new();
    for dag in group {
        nodes.extend_from_slice(dag.nodes());
        arcs.extend_from_slice(dag.arcs());
        members.push(dag.entity);
    }
    if members.is_empty() {
        return Err(Error::Empty("union of an empty group"));
    }
    members.sort_unstable();
    Ok(UnionGraph {
        graph: Digraph::new(nodes, arcs),
        members,
    })
}

pub fn is_weakly_connected(g: &UnionGraph) -> bool {
    g.is_weakly_connected()
}

// ---------------------------------------------------------------------------
// file formats

#[derive(Debug, Serialize, Deserialize)]
struct ObservationRow<'a> {
    node: &'a str,
    entity: &'a str,
    time: &'a str,
}

/// Reads a whitespace-separated `u v` edge list. `#` lines are comments and a
/// line with a single token declares an isolated node.
pub fn read_graph(reader: impl Read, path: &Path) -> Result<SocialGraph> {
    let mut nodes = Interner::new();
    let mut arcs = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [v] => {
                nodes.intern(v);
            }
            [u, v] => {
                let (u, v) = (nodes.intern(u), nodes.intern(v));
                if u == v {
                    log::warn!("{}:{}: self-loop dropped", path.display(), lineno + 1);
                } else {
                    arcs.push((u, v));
                }
            }
            _ => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: lineno + 1,
                    message: format!("expected `u v`, got {line:?}"),
                })
            }
        }
    }
    Ok(SocialGraph::from_arcs(nodes, arcs))
}

/// Reads the `node,entity,time` CSV against an already loaded graph.
pub fn read_observations(reader: impl Read, path: &Path, graph: &SocialGraph) -> Result<(Interner, Vec<Observation>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["node", "entity", "time"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            message: format!(
                "expected header `node,entity,time`, got {:?}",
                headers.iter().collect::<Vec<_>>()
            ),
        });
    }
    let mut entities = Interner::new();
    let mut seen: HashMap<(NodeIx, EntityIx), usize> = HashMap::new();
    let mut observations: Vec<Observation> = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut line = 1;
    while rdr.read_record(&mut record)? {
        line += 1;
        let parse_err = |message: String| Error::Parse {
            path: path.to_owned(),
            line,
            message,
        };
        let row: ObservationRow = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(e.to_string()))?;
        let node = graph
            .nodes
            .get(row.node)
            .ok_or_else(|| parse_err(format!("unknown node {:?}", row.node)))?;
        let time: u64 = row
            .time
            .parse()
            .map_err(|_| parse_err(format!("time {:?} is not a non-negative integer", row.time)))?;
        let entity = entities.intern(row.entity);
        let obs = Observation { node, entity, time };
        match seen.get(&(node, entity)) {
            Some(&i) => {
                log::warn!(
                    "{}:{line}: repeated observation of {} at {}, keeping the earliest",
                    path.display(),
                    row.entity,
                    row.node
                );
                if time < observations[i].time {
                    observations[i].time = time;
                }
            }
            None => {
                seen.insert((node, entity), observations.len());
                observations.push(obs);
            }
        }
    }
    if observations.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    Ok((entities, observations))
}

/// Loads the social graph and the propagation database from disk.
pub fn ingest(observations_path: &Path, graph_path: &Path) -> Result<(SocialGraph, PropagationDb)> {
    let graph_file = File::open(graph_path).map_err(|e| Error::io(graph_path, e))?;
    let graph = read_graph(graph_file, graph_path)?;
    let obs_file = File::open(observations_path).map_err(|e| Error::io(observations_path, e))?;
    let (entities, observations) = read_observations(obs_file, observations_path, &graph)?;
    let db = PropagationDb::from_observations(entities, &observations, &graph)?;
    Ok((graph, db))
}

pub fn write_graph(graph: &SocialGraph, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "# {} nodes, {} arcs", graph.node_count(), graph.arc_count())?;
    for v in 0..graph.node_count() as NodeIx {
        writeln!(w, "{}", graph.node_name(v))?;
    }
    for (u, v) in graph.arcs() {
        writeln!(w, "{} {}", graph.node_name(u), graph.node_name(v))?;
    }
    Ok(())
}

pub fn write_observations(db: &PropagationDb, graph: &SocialGraph, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["node", "entity", "time"])?;
    for dag in db.dags() {
        let mut acts = dag.activations().to_vec();
        acts.sort_by_key(|&(v, t)| (t, v));
        for (v, t) in acts {
            wtr.write_record([graph.node_name(v), db.entity_name(dag.entity), &t.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<observations>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_graph() -> SocialGraph {
        // u -> v -> w plus the shortcut u -> w
        SocialGraph::with_numbered_nodes(3, [(0, 1), (1, 2), (0, 2)])
    }

    #[test]
    fn equal_times_exclude_the_arc() {
        let dag = derive_dag(0, &[(0, 3), (1, 3)], &chain_graph());
        assert_eq!(dag.arcs(), &[] as &[Arc]);
    }

    #[test]
    fn full_chain_keeps_all_three_arcs() {
        let dag = derive_dag(0, &[(0, 1), (1, 2), (2, 3)], &chain_graph());
        assert_eq!(dag.arcs(), &[(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn reversed_times_exclude_the_arc() {
        let dag = derive_dag(0, &[(0, 5), (1, 2)], &chain_graph());
        assert!(dag.arcs().is_empty());
        assert_eq!(dag.nodes(), &[0, 1]);
    }

    #[test]
    fn repeated_observation_keeps_first_time() {
        let dag = derive_dag(0, &[(0, 9), (0, 3)], &chain_graph());
        assert_eq!(dag.activations(), &[(0, 3)]);
    }

    #[test]
    fn lone_observation_gives_single_node_dag() {
        let dag = derive_dag(0, &[(2, 1)], &chain_graph());
        assert_eq!(dag.nodes(), &[2]);
        assert!(dag.arcs().is_empty());
    }

    #[test]
    fn union_of_nothing_is_an_error() {
        assert!(union_graph(std::iter::empty()).is_err());
    }

    #[test]
    fn disjoint_dags_union_is_disconnected() {
        let g = SocialGraph::with_numbered_nodes(4, [(0, 1), (2, 3)]);
        let a = derive_dag(0, &[(0, 1), (1, 2)], &g);
        let b = derive_dag(1, &[(2, 1), (3, 2)], &g);
        let u = union_graph([&a, &b]).unwrap();
        assert!(!u.is_weakly_connected());
        assert_eq!(u.members, vec![0, 1]);
    }

    #[test]
    fn unknown_node_names_the_line() {
        let graph = read_graph("a b\n".as_bytes(), Path::new("g.txt")).unwrap();
        let err = read_observations(
            "node,entity,time\na,x,1\nzz,x,2\n".as_bytes(),
            Path::new("o.csv"),
            &graph,
        )
        .unwrap_err();
        assert!(err.to_string().contains("o.csv:3"), "{err}");
    }

    #[test]
    fn non_integer_time_is_fatal() {
        let graph = read_graph("a b\n".as_bytes(), Path::new("g.txt")).unwrap();
        assert!(read_observations("node,entity,time\na,x,1.5\n".as_bytes(), Path::new("o.csv"), &graph).is_err());
        assert!(read_observations("node,entity,time\na,x,-1\n".as_bytes(), Path::new("o.csv"), &graph).is_err());
    }

    #[test]
    fn empty_observation_file_is_fatal() {
        let graph = read_graph("a b\n".as_bytes(), Path::new("g.txt")).unwrap();
        let err = read_observations("node,entity,time\n".as_bytes(), Path::new("o.csv"), &graph).unwrap_err();
        assert!(matches!(err, Error::EmptyDatabase));
    }

    #[test]
    fn graph_comments_and_self_loops() {
        let g = read_graph("# comment\na b\nb b\nb a\na b\nc\n".as_bytes(), Path::new("g")).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.arc_count(), 2);
    }
}
