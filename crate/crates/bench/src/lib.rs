//! Benchmarks for the gaitcore engine live in `benches/`.
