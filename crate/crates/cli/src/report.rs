//! JSON documents written and read by the subcommands. Every document carries
//! `version`; wall-clock fields live under `timing` so that everything else is
//! reproducible byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use causal_cascade::learn::{CausalTopology, Criterion};
use causal_cascade::partition::{Group, GroupOrigin, GroupPartition, PartitionParams};
use causal_cascade::synth::{GeneratorConfig, GroundTruth};
use causal_cascade::{union_graph, Error, Interner, NodeIx, PropagationDb, Ranking, Result, SocialGraph};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDoc {
    pub version: u32,
    pub seed: u64,
    pub params: PartitionParams,
    pub groups: Vec<GroupDoc>,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDoc {
    pub id: usize,
    pub entities: Vec<String>,
    pub agony: u64,
    pub exact: bool,
    pub connected: bool,
    pub origin: GroupOrigin,
    pub ranking: BTreeMap<String, u32>,
}

impl PartitionDoc {
    pub fn new(seed: u64, partition: &GroupPartition, db: &PropagationDb, graph: &SocialGraph, ms: f64) -> Self {
        let groups = partition
            .groups
            .iter()
            .enumerate()
            .map(|(id, g)| GroupDoc {
                id,
                entities: g
                    .members
                    .iter()
                    .map(|&i| db.entity_name(db.dags()[i].entity).to_owned())
                    .collect(),
                agony: g.agony,
                exact: g.exact,
                connected: g.connected,
                origin: g.origin,
                ranking: g
                    .ranking
                    .iter()
                    .map(|(v, r)| (graph.node_name(v).to_owned(), r))
                    .collect(),
            })
            .collect();
        PartitionDoc {
            version: FORMAT_VERSION,
            seed,
            params: partition.params.clone(),
            groups,
            timing: Timing { ms },
        }
    }

    /// Rebuilds the partition against `db`; union graphs are recomputed and
    /// the stored rankings reused.
    pub fn restore(&self, db: &PropagationDb, graph: &SocialGraph) -> Result<GroupPartition> {
        let mut groups = Vec::with_capacity(self.groups.len());
        for doc in &self.groups {
            let members = doc
                .entities
                .iter()
                .map(|e| {
                    db.position_of(e)
                        .ok_or_else(|| Error::InvalidParam(format!("partition names unknown entity {e:?}")))
                })
                .collect::<Result<Vec<usize>>>()?;
            let union = union_graph(members.iter().map(|&i| &db.dags()[i]))?.graph;
            let ranking = doc
                .ranking
                .iter()
                .map(|(name, &r)| node_ix(&graph.nodes, name).map(|v| (v, r)))
                .collect::<Result<Ranking>>()?;
            groups.push(Group {
                members,
                union,
                agony: doc.agony,
                exact: doc.exact,
                ranking,
                connected: doc.connected,
                origin: doc.origin,
            });
        }
        Ok(GroupPartition {
            groups,
            params: self.params.clone(),
        })
    }

    /// Planted-style labels: entity name to group id.
    pub fn labels(&self) -> BTreeMap<&str, usize> {
        self.groups
            .iter()
            .flat_map(|g| g.entities.iter().map(move |e| (e.as_str(), g.id)))
            .collect()
    }
}

fn node_ix(nodes: &Interner, name: &str) -> Result<NodeIx> {
    nodes
        .get(name)
        .ok_or_else(|| Error::InvalidParam(format!("unknown node {name:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDoc {
    pub version: u32,
    pub criterion: Criterion,
    pub baseline: bool,
    pub groups: Vec<TopologyGroupDoc>,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyGroupDoc {
    pub id: usize,
    pub samples: usize,
    pub candidate_arcs: Vec<[String; 2]>,
    pub arcs: Vec<[String; 2]>,
    /// Per node: parents and `[P(inactive), P(active)]` for every parent
    /// configuration, bit `i` being the state of parent `i`.
    pub theta: BTreeMap<String, CptDoc>,
    pub ll: f64,
    pub reg: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CptDoc {
    pub parents: Vec<String>,
    pub table: Vec<[f64; 2]>,
}

impl TopologyDoc {
    pub fn new(
        topologies: &[CausalTopology],
        criterion: Criterion,
        baseline: bool,
        graph: &SocialGraph,
        ms: f64,
    ) -> Self {
        let name = |v: NodeIx| graph.node_name(v).to_owned();
        let arcs = |a: &[(NodeIx, NodeIx)]| a.iter().map(|&(u, v)| [name(u), name(v)]).collect();
        let groups = topologies
            .iter()
            .map(|t| TopologyGroupDoc {
                id: t.group,
                samples: t.samples,
                candidate_arcs: arcs(&t.candidate_arcs),
                arcs: arcs(&t.selected),
                theta: t
                    .cpts
                    .iter()
                    .map(|(&v, cpt)| {
                        (
                            name(v),
                            CptDoc {
                                parents: cpt.parents.iter().map(|&p| name(p)).collect(),
                                table: cpt.table.clone(),
                            },
                        )
                    })
                    .collect(),
                ll: t.ll,
                reg: t.reg,
                score: t.score,
            })
            .collect();
        TopologyDoc {
            version: FORMAT_VERSION,
            criterion,
            baseline,
            groups,
            timing: Timing { ms },
        }
    }

    /// Union of the selected arcs as name pairs.
    pub fn arc_names(&self) -> impl Iterator<Item = (&str, &str)> {
        self.groups
            .iter()
            .flat_map(|g| g.arcs.iter().map(|[u, v]| (u.as_str(), v.as_str())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthDoc {
    pub version: u32,
    pub seed: u64,
    pub config: GeneratorConfig,
    pub delta: f64,
    pub nodes: Vec<String>,
    pub groups: Vec<Vec<String>>,
    /// Per group: `(parent, child, probability)`.
    pub causal: Vec<Vec<(String, String, f64)>>,
    /// Entity name to planted group.
    pub labels: BTreeMap<String, usize>,
}

impl GroundTruthDoc {
    pub fn new(seed: u64, config: &GeneratorConfig, truth: &GroundTruth) -> Self {
        let g = &truth.graph;
        let name = |v: NodeIx| g.node_name(v).to_owned();
        GroundTruthDoc {
            version: FORMAT_VERSION,
            seed,
            config: config.clone(),
            delta: truth.delta,
            nodes: g.nodes.names().to_vec(),
            groups: truth
                .groups
                .iter()
                .map(|s| s.iter().map(|&v| name(v)).collect())
                .collect(),
            causal: truth
                .causal
                .iter()
                .map(|c| c.arcs.iter().map(|&(u, v, p)| (name(u), name(v), p)).collect())
                .collect(),
            labels: truth
                .db
                .dags()
                .iter()
                .zip(&truth.labels)
                .map(|(d, &l)| (truth.db.entity_name(d.entity).to_owned(), l))
                .collect(),
        }
    }
}

/// Scores of one run as written by `eval` and `pipeline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub version: u32,
    pub seed: u64,
    pub accuracy: AccuracyDoc,
    pub baseline_accuracy: Option<AccuracyDoc>,
    pub nmi: f64,
    pub timing: MetricsTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyDoc {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTiming {
    pub ms_partition: Option<f64>,
    pub ms_learn: Option<f64>,
}

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub graph_model: String,
    pub delta: Option<f64>,
    pub noise: Option<f64>,
    pub alpha: f64,
    pub eta: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub criterion: Criterion,
    pub accuracy_psc: Option<f64>,
    pub accuracy_baseline: Option<f64>,
    pub nmi: Option<f64>,
    pub ms_partition: Option<f64>,
    pub ms_learn: Option<f64>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Appends rows, writing the header only when the file is new or empty.
pub fn append_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
