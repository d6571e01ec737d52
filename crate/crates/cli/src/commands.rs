use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use causal_cascade::eval::{arc_accuracy, group_pair_universe, mean_stdev, nmi, ConfusionCounts};
use causal_cascade::learn::{learn_all, LearnOptions};
use causal_cascade::partition::partition as run_partition;
use causal_cascade::pipeline::{timed_run, RunConfig, RunSeeds};
use causal_cascade::propagation::{read_graph, write_graph, write_observations};
use causal_cascade::synth::{generate, GeneratorConfig, GroundTruth};
use causal_cascade::{ingest, min_agony, Arc, Digraph, Error, Interner, PropagationDb, Result, SocialGraph};
use serde::Serialize;

use crate::report::{
    append_rows, read_json, write_json, AccuracyDoc, GroundTruthDoc, MetricsDoc, MetricsTiming, PartitionDoc,
    ResultRow, TopologyDoc, FORMAT_VERSION,
};
use crate::PipelineArgs;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn write_dataset(dir: &Path, seed: u64, config: &GeneratorConfig, truth: &GroundTruth) -> Result<()> {
    create_dir(dir)?;
    let graph_path = dir.join("graph.txt");
    write_graph(&truth.graph, create(&graph_path)?).map_err(|e| Error::io(&graph_path, e))?;
    write_observations(&truth.db, &truth.graph, create(&dir.join("observations.csv"))?)?;
    write_json(
        &dir.join("ground_truth.json"),
        &GroundTruthDoc::new(seed, config, truth),
    )
}

pub fn gen(config: &GeneratorConfig, seed: u64, out_dir: &Path) -> Result<()> {
    let config = GeneratorConfig {
        seed: RunSeeds::split(seed).gen,
        ..config.clone()
    };
    let truth = generate(&config)?;
    write_dataset(out_dir, seed, &config, &truth)?;
    log::info!(
        "{} traces over {} nodes in {} groups written to {}",
        truth.db.len(),
        truth.graph.node_count(),
        truth.groups.len(),
        out_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct AgonyDoc {
    version: u32,
    nodes: usize,
    arcs: usize,
    agony: u64,
    exact: bool,
    ranking: BTreeMap<String, u32>,
}

pub fn agony(graph_path: &Path, out: Option<&Path>) -> Result<()> {
    let file = File::open(graph_path).map_err(|e| Error::io(graph_path, e))?;
    let graph = read_graph(file, graph_path)?;
    let g = Digraph::new(0..graph.node_count() as u32, graph.arcs());
    let result = min_agony(&g);
    let doc = AgonyDoc {
        version: FORMAT_VERSION,
        nodes: g.node_count(),
        arcs: g.arc_count(),
        agony: result.agony,
        exact: result.exact,
        ranking: result
            .ranking
            .iter()
            .map(|(v, r)| (graph.node_name(v).to_owned(), r))
            .collect(),
    };
    match out {
        Some(path) => write_json(path, &doc),
        None => stdout_line(&serde_json::to_string_pretty(&doc)?),
    }
}

/// A closed stdout (`| head`) is not an error.
fn stdout_line(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

pub fn partition(observations: &Path, graph: &Path, args: &crate::PartitionArgs, seed: u64, out: &Path) -> Result<()> {
    let (graph, db) = ingest(observations, graph)?;
    let params = args.params(RunSeeds::split(seed).partition);
    let start = Instant::now();
    let p = run_partition(&db, &params)?;
    write_json(out, &PartitionDoc::new(seed, &p, &db, &graph, ms_since(start)))
}

fn learn_doc(db: &PropagationDb, graph: &SocialGraph, part: &PartitionDoc, opts: &LearnOptions) -> Result<TopologyDoc> {
    let restored = part.restore(db, graph)?;
    let start = Instant::now();
    let topologies = learn_all(&restored, db, opts)?;
    Ok(TopologyDoc::new(
        &topologies,
        opts.criterion,
        opts.baseline,
        graph,
        ms_since(start),
    ))
}

pub fn learn(observations: &Path, graph: &Path, partition: &Path, opts: &LearnOptions, out: &Path) -> Result<()> {
    let (graph, db) = ingest(observations, graph)?;
    let part: PartitionDoc = read_json(partition)?;
    write_json(out, &learn_doc(&db, &graph, &part, opts)?)
}

fn arcs_by_name<'a>(nodes: &Interner, arcs: impl Iterator<Item = (&'a str, &'a str)>) -> Result<BTreeSet<Arc>> {
    arcs.map(|(u, v)| {
        let ix = |n: &str| {
            nodes
                .get(n)
                .ok_or_else(|| Error::InvalidParam(format!("learned arc mentions unknown node {n:?}")))
        };
        Ok((ix(u)?, ix(v)?))
    })
    .collect()
}

fn accuracy_doc(c: ConfusionCounts, accuracy: f64) -> AccuracyDoc {
    AccuracyDoc {
        tp: c.tp,
        tn: c.tn,
        fp: c.fp,
        fn_: c.fn_,
        accuracy,
    }
}

/// Scores topology documents and a partition against a ground-truth document.
fn score(
    truth: &GroundTruthDoc,
    learned: &TopologyDoc,
    baseline: Option<&TopologyDoc>,
    part: &PartitionDoc,
) -> Result<MetricsDoc> {
    let mut nodes = Interner::new();
    for n in &truth.nodes {
        nodes.intern(n);
    }
    let groups = truth
        .groups
        .iter()
        .map(|g| g.iter().map(|n| nodes.intern(n)).collect())
        .collect::<Vec<Vec<u32>>>();
    let universe = group_pair_universe(&groups);
    let truth_arcs = arcs_by_name(
        &nodes,
        truth.causal.iter().flatten().map(|(u, v, _)| (u.as_str(), v.as_str())),
    )?;
    let (c, acc) = arc_accuracy(&truth_arcs, &arcs_by_name(&nodes, learned.arc_names())?, &universe)?;
    let baseline_accuracy = match baseline {
        Some(b) => {
            let (c, acc) = arc_accuracy(&truth_arcs, &arcs_by_name(&nodes, b.arc_names())?, &universe)?;
            Some(accuracy_doc(c, acc))
        }
        None => None,
    };
    let assigned = part.labels();
    let (mut planted, mut found) = (Vec::new(), Vec::new());
    for (entity, &label) in &truth.labels {
        if let Some(&g) = assigned.get(entity.as_str()) {
            planted.push(label);
            found.push(g);
        }
    }
    if planted.len() != truth.labels.len() {
        log::warn!(
            "{} of {} labeled entities are missing from the partition",
            truth.labels.len() - planted.len(),
            truth.labels.len()
        );
    }
    Ok(MetricsDoc {
        version: FORMAT_VERSION,
        seed: truth.seed,
        accuracy: accuracy_doc(c, acc),
        baseline_accuracy,
        nmi: nmi(&planted, &found)?,
        timing: MetricsTiming {
            ms_partition: Some(part.timing.ms),
            ms_learn: Some(learned.timing.ms),
        },
    })
}

fn result_row(truth: &GroundTruthDoc, learned: &TopologyDoc, part: &PartitionDoc, m: &MetricsDoc) -> ResultRow {
    ResultRow {
        seed: truth.seed,
        graph_model: truth.config.graph_model.to_string(),
        delta: Some(truth.delta),
        noise: Some(truth.config.noise),
        alpha: part.params.alpha,
        eta: part.params.eta,
        k: part.params.max_size,
        criterion: learned.criterion,
        accuracy_psc: Some(m.accuracy.accuracy),
        accuracy_baseline: m.baseline_accuracy.as_ref().map(|a| a.accuracy),
        nmi: Some(m.nmi),
        ms_partition: m.timing.ms_partition,
        ms_learn: m.timing.ms_learn,
    }
}

pub fn eval(
    ground_truth: &Path,
    learned: &Path,
    baseline: Option<&Path>,
    partition: &Path,
    out: &Path,
    results: Option<&Path>,
) -> Result<()> {
    let truth: GroundTruthDoc = read_json(ground_truth)?;
    let learned: TopologyDoc = read_json(learned)?;
    let baseline: Option<TopologyDoc> = baseline.map(read_json).transpose()?;
    let part: PartitionDoc = read_json(partition)?;
    let metrics = score(&truth, &learned, baseline.as_ref(), &part)?;
    write_json(out, &metrics)?;
    if let Some(path) = results {
        append_rows(path, &[result_row(&truth, &learned, &part, &metrics)])?;
    }
    Ok(())
}

fn run_dir(args: &PipelineArgs, seed: u64) -> PathBuf {
    if args.repeat == 1 {
        args.out_dir.clone()
    } else {
        args.out_dir.join(format!("run-{seed}"))
    }
}

/// One synthetic run; writes the data set and every artifact to its directory.
fn synthetic_run(args: &PipelineArgs, seed: u64) -> Result<ResultRow> {
    let base = args.gen.config();
    let mut opts = args.learn.options();
    opts.baseline = false;
    let config = RunConfig {
        seed,
        generator: base.clone(),
        partition: args.params.params(0),
        learn: opts,
    };
    let out = timed_run(&config)?;
    let dir = run_dir(args, seed);
    let generator = GeneratorConfig {
        seed: RunSeeds::split(seed).gen,
        ..base
    };
    write_dataset(&dir, seed, &generator, &out.truth)?;

    let (graph, db) = (&out.truth.graph, &out.truth.db);
    let part = PartitionDoc::new(seed, &out.partition, db, graph, out.record.ms_partition);
    let psc = TopologyDoc::new(&out.topologies, opts.criterion, false, graph, out.record.ms_learn);
    let baseline = TopologyDoc::new(&out.baseline, opts.criterion, true, graph, 0.0);
    let truth = GroundTruthDoc::new(seed, &generator, &out.truth);
    let metrics = score(&truth, &psc, Some(&baseline), &part)?;

    write_json(&dir.join("partition.json"), &part)?;
    write_json(
        &dir.join("topology.json"),
        if args.learn.baseline { &baseline } else { &psc },
    )?;
    write_json(&dir.join("baseline.json"), &baseline)?;
    write_json(&dir.join("metrics.json"), &metrics)?;
    Ok(result_row(&truth, &psc, &part, &metrics))
}

/// One run on files given on the command line.
fn file_run(args: &PipelineArgs, seed: u64) -> Result<()> {
    let (observations, graph) = (
        args.observations_csv.as_deref().expect("required by clap"),
        args.graph.as_deref().expect("required by clap"),
    );
    let (graph, db) = ingest(observations, graph)?;
    let params = args.params.params(RunSeeds::split(seed).partition);
    let start = Instant::now();
    let p = run_partition(&db, &params)?;
    let part = PartitionDoc::new(seed, &p, &db, &graph, ms_since(start));
    let topology = learn_doc(&db, &graph, &part, &args.learn.options())?;
    let dir = run_dir(args, seed);
    create_dir(&dir)?;
    write_json(&dir.join("partition.json"), &part)?;
    write_json(&dir.join("topology.json"), &topology)
}

#[derive(Serialize)]
struct Summary {
    mean: f64,
    stdev: f64,
}

#[derive(Serialize)]
struct AggregateDoc {
    version: u32,
    runs: usize,
    accuracy_psc: Summary,
    accuracy_baseline: Summary,
    nmi: Summary,
    ms_partition: Summary,
    ms_learn: Summary,
}

fn summary(rows: &[ResultRow], f: fn(&ResultRow) -> Option<f64>) -> Summary {
    let (mean, stdev) = mean_stdev(&rows.iter().filter_map(f).collect::<Vec<_>>());
    Summary { mean, stdev }
}

/// Runs `f` for every seed on up to `jobs` threads; results come back in seed
/// order.
fn parallel<T: Send>(seeds: &[u64], jobs: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    let jobs = jobs.clamp(1, seeds.len().max(1));
    let f = &f;
    let mut slots: Vec<Option<Result<T>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                s.spawn(move || {
                    seeds
                        .iter()
                        .enumerate()
                        .skip(j)
                        .step_by(jobs)
                        .map(|(i, &seed)| (i, f(seed)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut slots: Vec<Option<Result<T>>> = (0..seeds.len()).map(|_| None).collect();
        for h in handles {
            for (i, r) in h.join().expect("run thread panicked") {
                slots[i] = Some(r);
            }
        }
        slots
    });
    slots.iter_mut().map(|s| s.take().expect("every seed ran")).collect()
}

pub fn pipeline(args: &PipelineArgs) -> Result<()> {
    let first = args.seed.resolve()?;
    let seeds: Vec<u64> = (0..args.repeat).map(|i| first + i).collect();
    create_dir(&args.out_dir)?;
    if !args.gen_defaults {
        parallel(&seeds, args.jobs, |seed| file_run(args, seed))?;
        return Ok(());
    }
    let rows = parallel(&seeds, args.jobs, |seed| synthetic_run(args, seed))?;
    append_rows(&args.out_dir.join("results.csv"), &rows)?;
    let doc = AggregateDoc {
        version: FORMAT_VERSION,
        runs: rows.len(),
        accuracy_psc: summary(&rows, |r| r.accuracy_psc),
        accuracy_baseline: summary(&rows, |r| r.accuracy_baseline),
        nmi: summary(&rows, |r| r.nmi),
        ms_partition: summary(&rows, |r| r.ms_partition),
        ms_learn: summary(&rows, |r| r.ms_learn),
    };
    write_json(&args.out_dir.join("aggregate.json"), &doc)?;
    stdout_line(&format!(
        "{} runs: accuracy {:.3} (baseline {:.3}), NMI {:.3}",
        doc.runs, doc.accuracy_psc.mean, doc.accuracy_baseline.mean, doc.nmi.mean
    ))
}
