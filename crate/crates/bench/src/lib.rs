//! Criterion benchmarks for the FEM, GP and autoencoder kernels; see `benches/`.
