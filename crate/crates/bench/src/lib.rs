//! Criterion benchmarks for the cmc-core pipeline; see `benches/pipeline.rs`.
