use rayon::prelude::*;

use crate::chaos_basis::{chaos_poly_eval, encode_path, MultiIndex};
use crate::error::{usage, Result};
use crate::scalar::Scalar;
use crate::sde_lab::{path_rng, reference_state, sample_brownian_with, SdeSpec, DEFAULT_SIM_LEVEL};

/// Path resolution and state component for [`mc_project_coeff`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McOptions {
    pub sim_level: u32,
    pub component: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { sim_level: DEFAULT_SIM_LEVEL, component: 0 }
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl McEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        McEstimate { estimate: mean, std_error: (var / n).sqrt() }
    }

    /// `|estimate − target| ≤ k·SE`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.estimate - target).abs() <= k * self.std_error
    }
}

/// Estimates `x_α(t) = E[X_t·Ψ_α(G)]` from `n` independent paths. Path `i`
/// uses stream `i` of `seed`; `α` ranges over all `m·d` features.
pub fn mc_project_coeff<S: Scalar>(
    spec: &SdeSpec<S>,
    alpha: &MultiIndex,
    t: S,
    n: usize,
    m: usize,
    seed: u64,
    options: McOptions,
) -> Result<McEstimate> {
    if n < 100 {
        return usage(format!("Monte-Carlo projection needs at least 100 paths, got {n}"));
    }
    if options.component >= spec.dim() {
        return usage(format!("component {} out of range for a {}-dimensional SDE", options.component, spec.dim()));
    }
    if alpha.len() > m * spec.dim() {
        return usage(format!("multi-index has {} slots but only {} features exist", alpha.len(), m * spec.dim()));
    }
    if m > 1usize << options.sim_level {
        return usage(format!("basis size {m} exceeds the path resolution 2^{}", options.sim_level));
    }
    let k = crate::sde_lab::grid_index(t, spec.horizon(), options.sim_level)?;
    let values = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let path = sample_brownian_with(&mut rng, options.sim_level, spec.horizon(), spec.dim());
            let x = reference_state(spec, &path, k)?[options.component];
            let g = encode_path(&path, m)?;
            Ok((x * chaos_poly_eval(alpha, g.as_slice())?).into_f64())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_samples(&values))
}
