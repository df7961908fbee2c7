//! Criterion benchmarks for the solvers. See `benches/`.
