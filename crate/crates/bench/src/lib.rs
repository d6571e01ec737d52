//! Criterion benchmarks for the agony solver, the sampling partitioner and
//! hill climbing. See `benches/`.
