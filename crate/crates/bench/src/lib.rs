//! Benchmarks for the exact solvers live in `benches/`.
