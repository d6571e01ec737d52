//! Small directed-graph type shared by union graphs, reconstructed DAGs and
//! learned topologies.
//!
//! Nodes are dense social-graph indices (`u32`). A [`Digraph`] keeps its node
//! list and arc list sorted and deduplicated, so two graphs with the same
//! content compare equal and serialize identically.

use std::collections::{BTreeSet, HashMap, VecDeque};

pub type NodeIx = u32;
pub type Arc = (NodeIx, NodeIx);

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Digraph {
    nodes: Vec<NodeIx>,
    arcs: Vec<Arc>,
}

impl Digraph {
    /// Builds a graph from arbitrary node and arc lists. Arc endpoints are
    /// added to the node set; self-loops and duplicates are dropped.
    pub fn new(nodes: impl IntoIterator<Item = NodeIx>, arcs: impl IntoIterator<Item = Arc>) -> Self {
        let mut node_set: BTreeSet<NodeIx> = nodes.into_iter().collect();
        let mut arc_set = BTreeSet::new();
        for (u, v) in arcs {
            if u == v {
                continue;
            }
            node_set.insert(u);
            node_set.insert(v);
            arc_set.insert((u, v));
        }
        Digraph {
            nodes: node_set.into_iter().collect(),
            arcs: arc_set.into_iter().collect(),
        }
    }

    pub fn from_arcs(arcs: impl IntoIterator<Item = Arc>) -> Self {
        Self::new(std::iter::empty(), arcs)
    }

    pub fn nodes(&self) -> &[NodeIx] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains_node(&self, v: NodeIx) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }

    pub fn contains_arc(&self, arc: Arc) -> bool {
        self.arcs.binary_search(&arc).is_ok()
    }

    /// Position of `v` in the sorted node list.
    pub fn local_index(&self, v: NodeIx) -> Option<usize> {
        self.nodes.binary_search(&v).ok()
    }

    /// Arcs expressed over local indices `0..node_count()`.
    pub fn local_arcs(&self) -> Vec<(usize, usize)> {
        let index: HashMap<NodeIx, usize> = self.nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        self.arcs.iter().map(|&(u, v)| (index[&u], index[&v])).collect()
    }

    /// Union of two graphs (set union of nodes and arcs).
    pub fn union(&self, other: &Digraph) -> Digraph {
        Digraph::new(
            self.nodes.iter().chain(other.nodes.iter()).copied(),
            self.arcs.iter().chain(other.arcs.iter()).copied(),
        )
    }

    /// Subgraph keeping every node and only the arcs accepted by `keep`.
    pub fn filter_arcs(&self, mut keep: impl FnMut(Arc) -> bool) -> Digraph {
        Digraph {
            nodes: self.nodes.clone(),
            arcs: self.arcs.iter().copied().filter(|&a| keep(a)).collect(),
        }
    }

    /// True iff the underlying undirected graph has exactly one component.
    /// A single-node graph is connected; the empty graph is not.
    pub fn is_weakly_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut uf = UnionFind::new(self.nodes.len());
        for (u, v) in self.local_arcs() {
            uf.union(u, v);
        }
        uf.components() == 1
    }

    /// Kahn's algorithm. Returns `None` when the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeIx>> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, v) in self.local_arcs() {
            out[u].push(v);
            indeg[v] += 1;
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = queue.pop_front() {
            order.push(self.nodes[u]);
            for &v in &out[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    queue.push_back(v);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
            components: n,
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.components -= 1;
        true
    }

    pub fn components(&self) -> usize {
        self.components
    }
}
