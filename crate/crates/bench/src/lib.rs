//! Criterion benchmarks for the tuning pipeline live in `benches/`.
