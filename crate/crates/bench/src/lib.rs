//! Benchmarks for the deduction engine and program rollouts; see `benches/`.
