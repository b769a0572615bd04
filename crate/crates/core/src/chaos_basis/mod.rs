//! Haar basis, Hermite polynomials, multi-indices and the Brownian-path encoder.

mod encoder;
mod haar;
mod hermite;
mod multi_index;

pub use encoder::{
    chaos_poly_eval, encode_component_into, encode_path, reconstruct_path, GaussianFeatures, HermiteCache,
};
pub use haar::{
    basis_levels, haar_antiderivative, haar_eval, haar_inner_product, haar_tail_energy, HaarIndex,
};
pub use hermite::{hermite_eval, hermite_table};
pub use multi_index::{binomial, enumerate_multi_indices, enumerate_on_slots, MultiIndex};
