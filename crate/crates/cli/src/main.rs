//! `causal-cascade`: generate synthetic propagation data, partition traces
//! into low-agony groups, learn causal topologies and score them.
//!
//! Exit status: 0 on success, 1 when an algorithm gives up (for example the
//! generator's rejection cap), 2 for I/O, parse and configuration errors.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use causal_cascade::learn::{Criterion, LearnOptions, Smoothing};
use causal_cascade::partition::{Algorithm, BeamWidth, Expedients, PartitionParams};
use causal_cascade::synth::{ArcProbabilities, CauseDensityBase, GeneratorConfig, GraphModel, Range};
use causal_cascade::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const SEED_ENV: &str = "CAUSAL_CASCADE_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "causal-cascade",
    version,
    about = "Social influence as causal propagation structure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic social graph, planted groups and noisy traces.
    Gen {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        seed: SeedArg,
        /// Directory for observations.csv, graph.txt and ground_truth.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Minimum agony and an optimal ranking of a directed graph.
    Agony {
        /// Edge list: one `u v` arc per line, `#` comments, lone names declare nodes.
        graph: PathBuf,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition the propagation DAGs into valid groups.
    Partition {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        params: PartitionArgs,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value = "partition.json")]
        out: PathBuf,
    },
    /// Learn one causal topology per group of a partition.
    Learn {
        #[command(flatten)]
        input: InputArgs,
        /// Partition JSON written by `partition`.
        #[arg(long)]
        partition: PathBuf,
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(long, default_value = "topology.json")]
        out: PathBuf,
    },
    /// Score learned topologies and a partition against ground truth.
    Eval {
        #[arg(long)]
        ground_truth: PathBuf,
        /// Topology JSON of the full method.
        #[arg(long)]
        learned: PathBuf,
        /// Topology JSON of the baseline, scored alongside when given.
        #[arg(long)]
        baseline_learned: Option<PathBuf>,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long, default_value = "metrics.json")]
        out: PathBuf,
        /// Results CSV to append one row to.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Partition, reconstruct, hill-climb and (on synthetic data) score.
    Pipeline(Box<PipelineArgs>),
}

#[derive(Args, Debug, Clone)]
struct SeedArg {
    /// Run seed; the CAUSAL_CASCADE_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SeedArg {
    fn resolve(&self) -> Result<u64> {
        match std::env::var(SEED_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParam(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
            Err(_) => Ok(self.seed),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// Observations CSV with header `node,entity,time`.
    #[arg(long)]
    observations: PathBuf,
    /// Social graph edge list.
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgorithmArg {
    TwoStep,
    Sampling,
}

#[derive(Args, Debug, Clone)]
struct PartitionArgs {
    /// Agony bound per group.
    #[arg(long, default_value_t = 0)]
    eta: u64,
    /// Maximum traces per group (K).
    #[arg(long, default_value_t = 100)]
    max_size: usize,
    /// Acceptance fraction for sampled groups.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "sampling")]
    algorithm: AlgorithmArg,
    /// Largest database the two-step miner accepts.
    #[arg(long, default_value_t = 20)]
    mining_limit: usize,
    /// Keep DAGs sharing no node with any other DAG in the sampling loop.
    #[arg(long)]
    keep_isolated: bool,
    /// Recompute agony for every candidate even when provably unchanged.
    #[arg(long)]
    no_skip_agony: bool,
    /// Per-computation agony deadline; a greedy upper bound is used past it.
    #[arg(long)]
    agony_deadline_ms: Option<u64>,
    /// Sample candidates from a random subset of this many uncovered DAGs.
    #[arg(long, conflicts_with = "beam_log")]
    beam: Option<usize>,
    /// Beam of `ceil(f * log2(uncovered + 1))` DAGs.
    #[arg(long)]
    beam_log: Option<f64>,
    /// Sampling attempts per group before a singleton fallback
    /// (default 10 * ceil(1 / alpha)).
    #[arg(long)]
    max_retries: Option<usize>,
    /// Emit the remaining DAGs as singletons once at most this many are left.
    #[arg(long)]
    flush_below: Option<usize>,
}

impl PartitionArgs {
    fn params(&self, seed: u64) -> PartitionParams {
        PartitionParams {
            eta: self.eta,
            max_size: self.max_size,
            alpha: self.alpha,
            seed,
            algorithm: match self.algorithm {
                AlgorithmArg::TwoStep => Algorithm::TwoStep,
                AlgorithmArg::Sampling => Algorithm::Sampling,
            },
            mining_limit: self.mining_limit,
            expedients: Expedients {
                drop_isolated: !self.keep_isolated,
                skip_agony: !self.no_skip_agony,
                agony_deadline: self.agony_deadline_ms.map(Duration::from_millis),
                beam: self.beam.map(BeamWidth::Fixed).or(self.beam_log.map(BeamWidth::Log)),
                max_retries: self.max_retries,
                flush_below: self.flush_below,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CriterionArg {
    Bic,
    Aic,
}

#[derive(Args, Debug, Clone)]
struct LearnArgs {
    #[arg(long, value_enum, default_value = "bic")]
    criterion: CriterionArg,
    /// Keep every reconstructed arc (no hill climbing).
    #[arg(long)]
    baseline: bool,
    /// CPT pseudocount; 0 gives maximum likelihood.
    #[arg(long, default_value_t = 1.0)]
    pseudocount: f64,
}

impl LearnArgs {
    fn options(&self) -> LearnOptions {
        LearnOptions {
            criterion: match self.criterion {
                CriterionArg::Bic => Criterion::Bic,
                CriterionArg::Aic => Criterion::Aic,
            },
            smoothing: Smoothing {
                pseudocount: self.pseudocount,
            },
            baseline: self.baseline,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    ErdosRenyi,
    PowerLaw,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CauseBaseArg {
    Pairs,
    InducedEdges,
}

/// Generator settings; unset flags keep the defaults of the chosen model.
#[derive(Args, Debug, Clone)]
struct GenArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "erdos-renyi")]
    graph_model: ModelArg,
    /// Social density, `x` or `lo:hi` (edges over n choose 2).
    #[arg(long)]
    delta: Option<Range>,
    /// Turn every edge into two opposite arcs.
    #[arg(long)]
    reciprocal: Option<bool>,
    /// Number of planted groups.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    card_min: Option<usize>,
    #[arg(long)]
    card_max: Option<usize>,
    #[arg(long)]
    card_overlap: Option<usize>,
    #[arg(long)]
    group_affinity: Option<f64>,
    /// Causal density, `x` or `lo:hi`.
    #[arg(long)]
    delta_cause: Option<Range>,
    #[arg(long, value_enum)]
    cause_density_base: Option<CauseBaseArg>,
    /// Fixed lower bound of arc probabilities (with --p-max).
    #[arg(long, requires = "p_max")]
    p_min: Option<f64>,
    #[arg(long, requires = "p_min")]
    p_max: Option<f64>,
    /// Number of traces.
    #[arg(long)]
    observations: Option<usize>,
    #[arg(long)]
    size_window: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    root_activation: Option<f64>,
}

impl GenArgs {
    fn config(&self) -> GeneratorConfig {
        let mut c = match self.graph_model {
            ModelArg::ErdosRenyi => GeneratorConfig {
                graph_model: GraphModel::ErdosRenyi,
                ..GeneratorConfig::default()
            },
            ModelArg::PowerLaw => GeneratorConfig::power_law(0.05),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(
            n,
            delta,
            reciprocal,
            k,
            card_min,
            card_max,
            card_overlap,
            group_affinity,
            delta_cause,
            observations,
            size_window,
            noise,
            root_activation
        );
        if let Some(b) = self.cause_density_base {
            c.cause_density_base = match b {
                CauseBaseArg::Pairs => CauseDensityBase::Pairs,
                CauseBaseArg::InducedEdges => CauseDensityBase::InducedEdges,
            };
        }
        if let (Some(p_min), Some(p_max)) = (self.p_min, self.p_max) {
            c.arc_probabilities = ArcProbabilities::Within { p_min, p_max };
        }
        c
    }
}

#[derive(Args, Debug, Clone)]
struct PipelineArgs {
    /// Generate synthetic data per seed instead of reading files.
    #[arg(long, conflicts_with_all = ["observations_csv", "graph"])]
    gen_defaults: bool,
    /// Observations CSV (the generator's `--observations` is a trace count).
    #[arg(long, required_unless_present = "gen_defaults")]
    observations_csv: Option<PathBuf>,
    #[arg(long, required_unless_present = "gen_defaults")]
    graph: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
    #[command(flatten)]
    params: PartitionArgs,
    #[command(flatten)]
    learn: LearnArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Runs seeds seed..seed+repeat-1 and aggregates.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    repeat: u64,
    /// Parallel runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { gen, seed, out_dir } => commands::gen(&gen.config(), seed.resolve()?, &out_dir),
        Command::Agony { graph, out } => commands::agony(&graph, out.as_deref()),
        Command::Partition {
            input,
            params,
            seed,
            out,
        } => commands::partition(&input.observations, &input.graph, &params, seed.resolve()?, &out),
        Command::Learn {
            input,
            partition,
            learn,
            out,
        } => commands::learn(&input.observations, &input.graph, &partition, &learn.options(), &out),
        Command::Eval {
            ground_truth,
            learned,
            baseline_learned,
            partition,
            out,
            results,
        } => commands::eval(
            &ground_truth,
            &learned,
            baseline_learned.as_deref(),
            &partition,
            &out,
            results.as_deref(),
        ),
        Command::Pipeline(args) => commands::pipeline(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
