//! Benchmark-only crate: see `benches/pipeline.rs` for the criterion
//! harness covering the simulator hot paths.
