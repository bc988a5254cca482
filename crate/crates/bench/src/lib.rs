//! Benchmarks for the coefficient paths and the time-stepping schemes live in
//! `benches/`; run them with `cargo bench -p fracstep-bench`.
