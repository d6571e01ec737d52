//! Minimal causal topology per group.
//!
//! The union graph of a group is cut down to a DAG by keeping only the arcs
//! that agree with its minimum-agony ranking. Hill climbing then selects the
//! subset of those arcs maximizing `LL - R`, where `LL` is the log-likelihood
//! of the group's activation matrix under a Bayesian network with one
//! conditional probability table per node and `R` is the BIC or AIC penalty on
//! the number of selected arcs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agony::Ranking;
use crate::error::{Error, Result};
use crate::graph::{Arc, Digraph, NodeIx};
use crate::partition::{Group, GroupPartition};
use crate::propagation::PropagationDb;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Bic,
    Aic,
}

impl Criterion {
    /// Penalty per selected arc.
    pub fn per_arc(self, samples: usize) -> f64 {
        match self {
            Criterion::Aic => 1.0,
            Criterion::Bic => (samples as f64).ln() / 2.0,
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bic" => Ok(Criterion::Bic),
            "aic" => Ok(Criterion::Aic),
            other => Err(Error::InvalidParam(format!("unknown criterion {other:?}"))),
        }
    }
}

/// `|A|` for AIC, `|A| / 2 * ln S` for BIC.
pub fn regularizer(arc_count: usize, samples: usize, criterion: Criterion) -> f64 {
    if arc_count == 0 {
        return 0.0;
    }
    arc_count as f64 * criterion.per_arc(samples)
}

/// Binary traces-by-nodes matrix of one group; stored column-wise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationMatrix {
    nodes: Vec<NodeIx>,
    samples: usize,
    columns: Vec<Vec<bool>>,
}

impl ActivationMatrix {
    /// One row per member trace; a node is active iff the trace reaches it.
    pub fn from_group(db: &PropagationDb, members: &[usize], nodes: &[NodeIx]) -> Self {
        let dags = db.dags();
        let columns = nodes
            .iter()
            .map(|&v| members.iter().map(|&m| dags[m].is_active(v)).collect())
            .collect();
        ActivationMatrix {
            nodes: nodes.to_vec(),
            samples: members.len(),
            columns,
        }
    }

    /// `rows[s][j]` is the state of `nodes[j]` in sample `s`.
    pub fn from_rows(nodes: &[NodeIx], rows: &[Vec<bool>]) -> Self {
        let columns = (0..nodes.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        ActivationMatrix {
            nodes: nodes.to_vec(),
            samples: rows.len(),
            columns,
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn nodes(&self) -> &[NodeIx] {
        &self.nodes
    }

    fn column_of(&self, v: NodeIx) -> Option<usize> {
        self.nodes.binary_search(&v).ok()
    }

    /// `counts[config][state]` for `child` under the parent columns; bit `i`
    /// of `config` is the state of `parents[i]`.
    fn family_counts(&self, child: usize, parents: &[usize]) -> Vec<[u32; 2]> {
        let mut counts = vec![[0u32; 2]; 1 << parents.len()];
        for s in 0..self.samples {
            let config = parents
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &p)| acc | ((self.columns[p][s] as usize) << i));
            counts[config][self.columns[child][s] as usize] += 1;
        }
        counts
    }
}

/// Additive smoothing of the conditional probability tables. `pseudocount`
/// 1 is Laplace smoothing, 0 is the plain maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    pub pseudocount: f64,
}

impl Smoothing {
    pub const LAPLACE: Smoothing = Smoothing { pseudocount: 1.0 };
    pub const NONE: Smoothing = Smoothing { pseudocount: 0.0 };

    fn prob(self, hits: u32, total: u32) -> f64 {
        (hits as f64 + self.pseudocount) / (total as f64 + 2.0 * self.pseudocount)
    }
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::LAPLACE
    }
}

fn family_ll(counts: &[[u32; 2]], smoothing: Smoothing) -> f64 {
    let mut ll = 0.0;
    for cell in counts {
        let total = cell[0] + cell[1];
        for &n in cell {
            if n > 0 {
                ll += n as f64 * smoothing.prob(n, total).ln();
            }
        }
    }
    ll
}

/// Parent lists over matrix columns for an arc set.
fn parent_columns(arcs: &[Arc], m: &ActivationMatrix) -> Result<Vec<Vec<usize>>> {
    let mut parents = vec![Vec::new(); m.nodes.len()];
    for &(u, v) in arcs {
        let cu = m
            .column_of(u)
            .ok_or(Error::InvalidParam(format!("arc source {u} not in matrix")))?;
        let cv = m
            .column_of(v)
            .ok_or(Error::InvalidParam(format!("arc target {v} not in matrix")))?;
        parents[cv].push(cu);
    }
    for p in &mut parents {
        p.sort_unstable();
    }
    Ok(parents)
}

/// Natural-log likelihood of the matrix under the network `arcs`, with
/// parameters fitted by (smoothed) relative counts.
pub fn log_likelihood(arcs: &[Arc], m: &ActivationMatrix, smoothing: Smoothing) -> Result<f64> {
    if m.samples == 0 {
        return Err(Error::Empty("activation matrix has no traces"));
    }
    let parents = parent_columns(arcs, m)?;
    Ok((0..m.nodes.len())
        .map(|c| family_ll(&m.family_counts(c, &parents[c]), smoothing))
        .sum())
}

/// Keeps the arcs `(u, v)` of `union` with `r(u) < r(v)`.
pub fn reconstruct_dag(union: &Digraph, r: &Ranking) -> Result<Digraph> {
    for &v in union.nodes() {
        r.get(v).ok_or(Error::MissingRank(v))?;
    }
    Ok(union.filter_arcs(|(u, v)| r.get(u).unwrap() < r.get(v).unwrap()))
}

/// Conditional probability table of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub parents: Vec<NodeIx>,
    /// `table[config] = [P(inactive), P(active)]`; bit `i` of `config` is the
    /// state of `parents[i]`.
    pub table: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalTopology {
    pub group: usize,
    pub criterion: Criterion,
    pub samples: usize,
    pub candidate_arcs: Vec<Arc>,
    pub selected: Vec<Arc>,
    pub cpts: BTreeMap<NodeIx, Cpt>,
    pub ll: f64,
    pub reg: f64,
    pub score: f64,
}

fn fit(
    group: usize,
    candidates: &[Arc],
    selected: Vec<Arc>,
    m: &ActivationMatrix,
    criterion: Criterion,
    smoothing: Smoothing,
) -> Result<CausalTopology> {
    let parents = parent_columns(&selected, m)?;
    let mut cpts = BTreeMap::new();
    let mut ll = 0.0;
    for (c, ps) in parents.iter().enumerate() {
        let counts = m.family_counts(c, ps);
        ll += family_ll(&counts, smoothing);
        let table = counts
            .iter()
            .map(|cell| {
                let total = cell[0] + cell[1];
                if total == 0 && smoothing.pseudocount == 0.0 {
                    // unseen configuration, nothing to fit
                    [1.0, 0.0]
                } else {
                    let p = smoothing.prob(cell[1], total);
                    [1.0 - p, p]
                }
            })
            .collect();
        cpts.insert(
            m.nodes[c],
            Cpt {
                parents: ps.iter().map(|&p| m.nodes[p]).collect(),
                table,
            },
        );
    }
    let reg = regularizer(selected.len(), m.samples, criterion);
    Ok(CausalTopology {
        group,
        criterion,
        samples: m.samples,
        candidate_arcs: candidates.to_vec(),
        selected,
        cpts,
        ll,
        reg,
        score: ll - reg,
    })
}

/// Score gain of toggling each candidate arc given the current parent sets.
struct MoveScorer<'a> {
    m: &'a ActivationMatrix,
    smoothing: Smoothing,
    per_arc: f64,
    cols: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    family: Vec<f64>,
}

impl<'a> MoveScorer<'a> {
    fn new(candidates: &[Arc], m: &'a ActivationMatrix, criterion: Criterion, smoothing: Smoothing) -> Result<Self> {
        let cols = candidates
            .iter()
            .map(|&(u, v)| {
                Ok((
                    m.column_of(u)
                        .ok_or(Error::InvalidParam(format!("arc source {u} not in matrix")))?,
                    m.column_of(v)
                        .ok_or(Error::InvalidParam(format!("arc target {v} not in matrix")))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let parents = vec![Vec::new(); m.nodes.len()];
        let family = (0..m.nodes.len())
            .map(|c| family_ll(&m.family_counts(c, &[]), smoothing))
            .collect();
        Ok(MoveScorer {
            m,
            smoothing,
            per_arc: criterion.per_arc(m.samples),
            cols,
            parents,
            family,
        })
    }

    fn toggled(&self, i: usize, present: bool) -> (Vec<usize>, f64) {
        let (u, v) = self.cols[i];
        let mut ps = self.parents[v].clone();
        if present {
            ps.retain(|&p| p != u);
        } else {
            ps.push(u);
            ps.sort_unstable();
        }
        let ll = family_ll(&self.m.family_counts(v, &ps), self.smoothing);
        (ps, ll)
    }

    fn gain(&self, i: usize, present: bool) -> f64 {
        let v = self.cols[i].1;
        let (_, ll) = self.toggled(i, present);
        let dreg = if present { -self.per_arc } else { self.per_arc };
        ll - self.family[v] - dreg
    }

    fn apply(&mut self, i: usize, present: bool) {
        let v = self.cols[i].1;
        let (ps, ll) = self.toggled(i, present);
        self.parents[v] = ps;
        self.family[v] = ll;
    }
}

const MIN_GAIN: f64 = 1e-9;

/// Greedy hill climbing over subsets of `candidates` (which must be acyclic),
/// starting from no arcs. Each step applies the single add or remove with the
/// largest strict improvement of `LL - R`; ties go to the smallest arc.
pub fn hill_climb(
    group: usize,
    candidates: &[Arc],
    m: &ActivationMatrix,
    criterion: Criterion,
    smoothing: Smoothing,
) -> Result<CausalTopology> {
    if m.samples == 0 {
        return Err(Error::Empty("activation matrix has no traces"));
    }
    let mut candidates = candidates.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    let mut scorer = MoveScorer::new(&candidates, m, criterion, smoothing)?;
    let mut present = vec![false; candidates.len()];
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (i, &on) in present.iter().enumerate() {
            let g = scorer.gain(i, on);
            if g > MIN_GAIN && best.is_none_or(|(_, b)| g > b) {
                best = Some((i, g));
            }
        }
        let Some((i, _)) = best else { break };
        scorer.apply(i, present[i]);
        present[i] = !present[i];
    }
    let selected = candidates
        .iter()
        .zip(&present)
        .filter(|(_, &p)| p)
        .map(|(&a, _)| a)
        .collect();
    fit(group, &candidates, selected, m, criterion, smoothing)
}

/// True iff no single-arc toggle within the candidate set improves the score
/// of `topology` by more than rounding noise.
pub fn is_local_optimum(topology: &CausalTopology, m: &ActivationMatrix, smoothing: Smoothing) -> Result<bool> {
    let base = log_likelihood(&topology.selected, m, smoothing)?
        - regularizer(topology.selected.len(), m.samples, topology.criterion);
    for &arc in &topology.candidate_arcs {
        let mut arcs = topology.selected.clone();
        match arcs.iter().position(|&a| a == arc) {
            Some(i) => {
                arcs.remove(i);
            }
            None => arcs.push(arc),
        }
        let s = log_likelihood(&arcs, m, smoothing)? - regularizer(arcs.len(), m.samples, topology.criterion);
        if s > base + 1e-7 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnOptions {
    pub criterion: Criterion,
    pub smoothing: Smoothing,
    /// Keep every reconstructed arc instead of hill climbing.
    pub baseline: bool,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            criterion: Criterion::Bic,
            smoothing: Smoothing::LAPLACE,
            baseline: false,
        }
    }
}

pub fn learn_group(db: &PropagationDb, id: usize, group: &Group, opts: &LearnOptions) -> Result<CausalTopology> {
    let dag = reconstruct_dag(&group.union, &group.ranking)?;
    let m = ActivationMatrix::from_group(db, &group.members, group.union.nodes());
    if opts.baseline {
        fit(id, dag.arcs(), dag.arcs().to_vec(), &m, opts.criterion, opts.smoothing)
    } else {
        hill_climb(id, dag.arcs(), &m, opts.criterion, opts.smoothing)
    }
}

/// One topology per group, in group order.
pub fn learn_all(partition: &GroupPartition, db: &PropagationDb, opts: &LearnOptions) -> Result<Vec<CausalTopology>> {
    partition
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| learn_group(db, i, g, opts))
        .collect()
}
