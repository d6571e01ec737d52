//! Partition propagation traces over a social graph into low-agony groups and
//! learn one minimal causal DAG per group.
//!
//! The pipeline is:
//!
//! 1. [`propagation`]: ingest observations, derive one DAG per entity.
//! 2. [`partition`]: group the DAGs so that every group's union graph has
//!    agony at most `eta`, at most `K` members and is weakly connected.
//! 3. [`learn`]: turn each union graph into a DAG through its minimum-agony
//!    ranking and prune it by regularized-likelihood hill climbing.
//!
//! [`synth`] plants ground truth for experiments and [`eval`] scores results
//! against it.

pub mod agony;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod graph;
pub mod learn;
pub mod partition;
pub mod pipeline;
pub mod propagation;
pub mod synth;

pub use agony::{agony_of_ranking, min_agony, min_agony_bruteforce, AgonyResult, Ranking};
pub use error::{Error, Result};
pub use graph::{Arc, Digraph, NodeIx};
pub use propagation::{
    derive_dag, ingest, union_graph, EntityIx, Interner, Observation, PropagationDag, PropagationDb, SocialGraph,
    UnionGraph,
};
