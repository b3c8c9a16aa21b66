//! Benchmarks for the parse, compile and run pipeline; see `benches/pipeline.rs`.
