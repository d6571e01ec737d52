//! End-to-end synthetic runs: generate, partition, learn, score.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{arc_accuracy, group_pair_universe, mean_stdev, nmi};
use crate::graph::Arc;
use crate::learn::{learn_all, CausalTopology, Criterion, LearnOptions};
use crate::partition::{partition, GroupPartition, PartitionParams};
use crate::synth::{generate, GeneratorConfig, GroundTruth};

/// Independent seeds for the generator, the partitioner and the learner,
/// drawn in that order from one generator seeded with `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub gen: u64,
    pub partition: u64,
    pub learn: u64,
}

impl RunSeeds {
    pub fn split(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RunSeeds {
            gen: rng.gen(),
            partition: rng.gen(),
            learn: rng.gen(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub partition: PartitionParams,
    pub learn: LearnOptions,
}

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub graph_model: String,
    pub delta: f64,
    pub noise: f64,
    pub alpha: f64,
    pub eta: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub criterion: Criterion,
    pub accuracy_psc: f64,
    pub accuracy_baseline: f64,
    pub nmi: f64,
    pub ms_partition: f64,
    pub ms_learn: f64,
}

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub truth: GroundTruth,
    pub partition: GroupPartition,
    pub topologies: Vec<CausalTopology>,
    pub baseline: Vec<CausalTopology>,
    pub record: RunRecord,
}

pub fn learned_arcs(topologies: &[CausalTopology]) -> BTreeSet<Arc> {
    topologies.iter().flat_map(|t| t.selected.iter().copied()).collect()
}

/// Scores learned arcs against the planted causal arcs over the group-pair
/// universe.
pub fn score_arcs(truth: &GroundTruth, topologies: &[CausalTopology]) -> Result<f64> {
    let universe = group_pair_universe(&truth.groups);
    Ok(arc_accuracy(&truth.causal_arcs(), &learned_arcs(topologies), &universe)?.1)
}

/// Generates data and runs both the full method and the baseline on it.
pub fn timed_run(config: &RunConfig) -> Result<RunOutput> {
    let seeds = RunSeeds::split(config.seed);
    let generator = GeneratorConfig {
        seed: seeds.gen,
        ..config.generator.clone()
    };
    let truth = generate(&generator)?;
    let params = PartitionParams {
        seed: seeds.partition,
        ..config.partition.clone()
    };

    let start = Instant::now();
    let partition = partition(&truth.db, &params)?;
    let ms_partition = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let psc_opts = LearnOptions {
        baseline: false,
        ..config.learn
    };
    let topologies = learn_all(&partition, &truth.db, &psc_opts)?;
    let ms_learn = start.elapsed().as_secs_f64() * 1e3;
    let baseline = learn_all(
        &partition,
        &truth.db,
        &LearnOptions {
            baseline: true,
            ..psc_opts
        },
    )?;

    let record = RunRecord {
        seed: config.seed,
        graph_model: generator.graph_model.to_string(),
        delta: truth.delta,
        noise: generator.noise,
        alpha: params.alpha,
        eta: params.eta,
        k: params.max_size,
        criterion: config.learn.criterion,
        accuracy_psc: score_arcs(&truth, &topologies)?,
        accuracy_baseline: score_arcs(&truth, &baseline)?,
        nmi: nmi(&truth.labels, &partition.labels(truth.db.len()))?,
        ms_partition,
        ms_learn,
    };
    Ok(RunOutput {
        truth,
        partition,
        topologies,
        baseline,
        record,
    })
}

/// Runs seeds `seed..seed + repeat` on up to `jobs` threads, in seed order.
pub fn repeat_runs(config: &RunConfig, repeat: usize, jobs: usize) -> Result<Vec<RunRecord>> {
    let seeds: Vec<u64> = (0..repeat as u64).map(|i| config.seed + i).collect();
    let jobs = jobs.clamp(1, repeat.max(1));
    let chunks: Vec<Vec<u64>> = (0..jobs)
        .map(|j| seeds.iter().copied().skip(j).step_by(jobs).collect())
        .collect();
    let results: Vec<Result<Vec<RunRecord>>> = std::thread::scope(|s| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|chunk| {
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|&seed| timed_run(&RunConfig { seed, ..config.clone() }).map(|o| o.record))
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    });
    let mut records = Vec::with_capacity(repeat);
    for r in results {
        records.extend(r?);
    }
    records.sort_by_key(|r| r.seed);
    Ok(records)
}

/// Mean and standard deviation of every score and timing column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub accuracy_psc: (f64, f64),
    pub accuracy_baseline: (f64, f64),
    pub nmi: (f64, f64),
    pub ms_partition: (f64, f64),
    pub ms_learn: (f64, f64),
}

pub fn aggregate(records: &[RunRecord]) -> Aggregate {
    let col = |f: fn(&RunRecord) -> f64| mean_stdev(&records.iter().map(f).collect::<Vec<_>>());
    Aggregate {
        runs: records.len(),
        accuracy_psc: col(|r| r.accuracy_psc),
        accuracy_baseline: col(|r| r.accuracy_baseline),
        nmi: col(|r| r.nmi),
        ms_partition: col(|r| r.ms_partition),
        ms_learn: col(|r| r.ms_learn),
    }
}
