//! Shared fixtures for the criterion benchmarks.

use eof_core::{Dataset, KernelSpec, Result, SyntheticTask};

/// Laplace-kernel regression data on `[0,1]^dim`.
pub fn fixture(dim: usize, n_train: usize, seed: u64) -> Result<Dataset> {
    SyntheticTask { kernel: KernelSpec::laplace(2.0, dim)?, n_train, n_test: 1, centers: 5, noise: 0.05, seed }
        .generate()
}
