//! Criterion benchmarks of rendering, its adjoint, the photometric loss and
//! a full training step. Run with `cargo bench -p splat-adc-bench`.
