//! Criterion benchmarks for the solvers and denoisers live in `benches/`.
