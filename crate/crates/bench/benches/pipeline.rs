use causal_cascade::learn::{learn_all, LearnOptions};
use causal_cascade::partition::{partition, PartitionParams};
use causal_cascade::synth::{generate, GeneratorConfig, GraphModel};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn dataset(model: GraphModel) -> causal_cascade::synth::GroundTruth {
    let config = GeneratorConfig {
        graph_model: model,
        seed: 7,
        ..GeneratorConfig::default()
    };
    generate(&config).expect("generator defaults are feasible")
}

fn bench_partition(c: &mut Criterion) {
    let truth = dataset(GraphModel::ErdosRenyi);
    let mut group = c.benchmark_group("sampling_partition");
    group.sample_size(10);
    for eta in [0u64, 1, 5] {
        let params = PartitionParams {
            eta,
            max_size: 100,
            seed: 1,
            ..PartitionParams::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(eta), &params, |b, p| {
            b.iter(|| partition(&truth.db, p).unwrap())
        });
    }
    group.finish();
}

fn bench_learn(c: &mut Criterion) {
    let truth = dataset(GraphModel::ErdosRenyi);
    let params = PartitionParams {
        max_size: 100,
        seed: 1,
        ..PartitionParams::default()
    };
    let p = partition(&truth.db, &params).unwrap();
    let opts = LearnOptions::default();
    let mut group = c.benchmark_group("learn_all");
    group.bench_function("hill_climb", |b| b.iter(|| learn_all(&p, &truth.db, &opts).unwrap()));
    let baseline = LearnOptions { baseline: true, ..opts };
    group.bench_function("baseline", |b| b.iter(|| learn_all(&p, &truth.db, &baseline).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_partition, bench_learn);
criterion_main!(benches);
