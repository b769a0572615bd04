//! The SDEONet operator: Haar encoder, branch and trunk networks and the
//! bilinear reconstructor, with training, evaluation and error splitting.

mod decompose;
mod evaluate;
mod model;
mod train;

pub use decompose::{energy_truncation_error, error_decomposition, DecompositionOptions, ErrorDecomposition};
pub use evaluate::{evaluate, simulate_predictions, EvalOptions, MetricsReport, MetricsRow};
pub use model::{
    aligned_grid, predict_branch_trunk, reconstruct, reference_states, Architecture, BranchTrunk, PathBatch, PathOperator, PceSurrogate,
    ReferenceOperator, SdeonetModel,
};
pub use train::{loss, loss_gradients, train, TrainConfig, TrainReport};
