//! Wiener-chaos based operator learning for SDE solution maps: Haar/Hermite
//! chaos features, SDE simulation, reference chaos coefficients, small
//! feed-forward networks and the SDEONet branch/trunk model.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

pub mod chaos_basis;
pub mod error;
pub mod metrics;
pub mod neural;
pub mod pce_ref;
pub mod scalar;
pub mod sde_lab;
pub mod sdeonet;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mlp64 = neural::Mlp<f64>;
pub type Mlp32 = neural::Mlp<f32>;
pub type Sdeonet64 = sdeonet::SdeonetModel<f64>;
pub type Sdeonet32 = sdeonet::SdeonetModel<f32>;
pub type SdeSpec64 = sde_lab::SdeSpec<f64>;
pub type SdeSpec32 = sde_lab::SdeSpec<f32>;
pub type CoefficientTable64 = pce_ref::CoefficientTable<f64>;
pub type CoefficientTable32 = pce_ref::CoefficientTable<f32>;
