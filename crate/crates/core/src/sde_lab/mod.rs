//! Brownian paths, benchmark SDEs with reference solutions, Euler–Maruyama,
//! and training-set assembly.

mod brownian;
mod dataset;
mod sde;

pub(crate) use brownian::grid_index;
pub use brownian::{path_rng, sample_brownian, sample_brownian_with, DyadicPath};
pub use dataset::{dataset_header, make_dataset, read_dataset, sample_path, write_dataset, Sample};
pub use sde::{
    euler_maruyama, exact_solution, reference_state, reference_trajectory, DiffusionFn, DriftFn, SdeKind,
    SdeSpec,
};

/// Default simulation level for training data and references.
pub const DEFAULT_SIM_LEVEL: u32 = 12;
