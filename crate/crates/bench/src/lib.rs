//! Benchmark-only crate; see `benches/engines.rs`.
