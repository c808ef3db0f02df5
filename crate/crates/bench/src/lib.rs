//! Benchmarks for convoy-core live in `benches/`.
