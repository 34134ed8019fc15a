//! Criterion benchmarks for the tobit kernels; see `benches/`.
