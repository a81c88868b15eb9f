//! Criterion benchmarks for ap3-core; see `benches/`.
