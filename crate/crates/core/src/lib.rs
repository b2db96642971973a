//! Sparse, compactly supported and mutually orthogonal features for
//! Sturm–Liouville product kernels on `[0,1]^D`, with random-feature
//! baselines, linear learners and a benchmark pipeline.
//!
//! ```
//! use eof_core::{design_for_m, EofMap, FeatureScale, KernelSpec};
//!
//! let kernel = KernelSpec::laplace(2.0, 2).unwrap();
//! let map = EofMap::new(kernel, design_for_m(2, 17, 0).unwrap(), FeatureScale::Normalized).unwrap();
//! let z = map.embed(&[0.3, 0.7]).unwrap();
//! assert_eq!(z.nnz(), 6);
//! ```

pub mod baselines;
pub mod bench;
pub mod design;
pub mod embed;
pub mod error;
pub mod features;
pub mod kernels;
pub mod learn;
pub mod model_io;
pub mod sparse;

pub use baselines::{gaussian_rff_map, orf_map, rks_map, selected_map, RandomFeatureMap, RfMethod};
pub use bench::{estimate_sigma, run_benchmark, standardize, BenchConfig, BenchResult, Dataset, Method, SyntheticTask};
pub use design::{design_for_m, entropic_select, enumerate_sparse_grid, sparse_grid_size, truncate_random, IndexSet};
pub use embed::{EofMap, FeatureScale};
pub use error::{Error, Result};
pub use features::{hierarchical_surplus, phi_1d, phi_nd, FeatureIndex};
pub use kernels::{kernel_eval, norm_const, KernelKind, KernelSpec, SturmLiouville};
pub use learn::{logistic_fit, ridge_fit, FeatureMap, FeatureMatrix, LinearFit, Model, Task, TrainOptions};
pub use model_io::{read_model, write_model, SavedModel};
pub use sparse::{SparseMat, SparseVec};
