//! Feed-forward ReLU networks with reverse-mode gradients and Adam.

mod adam;
mod checkpoint;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_mlp, write_mlp};
pub use mlp::{pad_to_depth, parallelise, ForwardCache, InitScheme, Layer, Mlp, MlpGrads};
