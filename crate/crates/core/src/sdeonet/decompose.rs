use ndarray::Array2;

use super::model::{aligned_grid, chaos_matrix, reference_states, BranchTrunk, PathBatch};
use crate::chaos_basis::{encode_path, MultiIndex};
use crate::error::{usage, Result};
use crate::pce_ref::CoefficientTable;
use crate::scalar::Scalar;
use crate::sde_lab::{SdeSpec, DEFAULT_SIM_LEVEL};

/// Time grid and path settings for [`error_decomposition`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecompositionOptions {
    pub n_times: usize,
    pub sim_level: u32,
    pub chunk_size: usize,
}

impl Default for DecompositionOptions {
    fn default() -> Self {
        DecompositionOptions { n_times: 33, sim_level: DEFAULT_SIM_LEVEL, chunk_size: 256 }
    }
}

/// `L²(Ω × [0,T])` error terms of the decomposition
/// `X − Σx̃Ψ̃ = (X − ΣxΨ) + Σx(Ψ − Ψ̃) + Σ(x − x̃)Ψ̃`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorDecomposition {
    pub e_trunc: f64,
    pub e_approx: f64,
    pub e_recon: f64,
    pub total: f64,
    /// Delta-method standard error of `total`.
    pub total_se: f64,
    /// Reference indices paired with branch outputs `0..selected.len()`.
    pub selected: Vec<MultiIndex>,
}

/// Splits the model error against the best-`p` reference expansion. The
/// `p` reference indices of largest `∫₀ᵀ x_α² dt` are paired with branch and
/// trunk outputs in canonical order; surplus outputs pair with zero.
pub fn error_decomposition<S: Scalar, M: BranchTrunk<S> + ?Sized>(
    model: &M,
    reference: &CoefficientTable<S>,
    spec: &SdeSpec<S>,
    n_eval: usize,
    seed: u64,
    options: &DecompositionOptions,
) -> Result<ErrorDecomposition> {
    if model.dim() != 1 || spec.dim() != 1 {
        return usage("the error decomposition is defined for scalar SDEs");
    }
    let horizon = spec.horizon();
    let tol = S::lit(1e-9) * horizon;
    if (reference.horizon() - horizon).abs() > tol || (model.horizon() - horizon).abs() > tol {
        return usage("model, reference table and SDE must share the horizon");
    }
    if n_eval < 2 {
        return usage("the error decomposition needs at least two paths");
    }
    let p = model.terms();
    let selected = reference.top_energy(p)?;
    let q = selected.indices().len();
    let times = aligned_grid(horizon, options.n_times, options.sim_level)?;
    let weights = trapezoid_weights(&times);
    let x_ref: Vec<Vec<S>> = times.iter().map(|&t| selected.coefficients_at(t)).collect::<Result<_>>()?;
    let x_tilde = model.trunk_batch(&times)?;

    // per-path time integrals of the squared terms: trunc, approx, recon, total
    let mut acc: Vec<[f64; 4]> = Vec::with_capacity(n_eval);
    let mut first = 0;
    while first < n_eval {
        let len = options.chunk_size.max(1).min(n_eval - first);
        let batch = PathBatch::sample(1, horizon, options.sim_level, model.basis_size(), seed, first as u64, len)?;
        let truth = reference_states(spec, &batch, &times)?;
        let ref_features = if reference.basis_size() == model.basis_size() {
            batch.features().to_owned()
        } else {
            features(&batch, reference.basis_size())?
        };
        let psi = chaos_matrix(ref_features.view(), selected.indices())?;
        let psi_tilde = model.branch_batch(batch.features())?;
        for i in 0..len {
            let mut sums = [0.0f64; 4];
            for (k, w) in weights.iter().enumerate() {
                let (mut trunc, mut approx, mut full) = (S::zero(), S::zero(), S::zero());
                for j in 0..q {
                    trunc += x_ref[k][j] * psi[[i, j]];
                    approx += x_ref[k][j] * psi_tilde[[i, j]];
                }
                for j in 0..p {
                    full += x_tilde[[k, j]] * psi_tilde[[i, j]];
                }
                let x = truth[[k, i, 0]];
                let terms = [x - trunc, trunc - approx, approx - full, x - full];
                for (s, e) in sums.iter_mut().zip(terms) {
                    let e = e.into_f64();
                    *s += w * e * e;
                }
            }
            acc.push(sums);
        }
        first += len;
    }
    let n = acc.len() as f64;
    let mean = |c: usize| acc.iter().map(|a| a[c]).sum::<f64>() / n;
    let total_sq = mean(3);
    let var = acc.iter().map(|a| (a[3] - total_sq).powi(2)).sum::<f64>() / (n - 1.0);
    let total = total_sq.sqrt();
    let total_se = if total > 0.0 { (var / n).sqrt() / (2.0 * total) } else { 0.0 };
    Ok(ErrorDecomposition {
        e_trunc: mean(0).sqrt(),
        e_approx: mean(1).sqrt(),
        e_recon: mean(2).sqrt(),
        total,
        total_se,
        selected: selected.indices().to_vec(),
    })
}

fn features<S: Scalar>(batch: &PathBatch<S>, m: usize) -> Result<Array2<S>> {
    let mut out = Array2::zeros((batch.len(), m));
    for (path, mut row) in batch.paths().iter().zip(out.outer_iter_mut()) {
        row.assign(&ndarray::ArrayView1::from(encode_path(path, m)?.component(0)));
    }
    Ok(out)
}

pub(crate) fn trapezoid_weights<S: Scalar>(times: &[S]) -> Vec<f64> {
    let mut w = vec![0.0; times.len()];
    for (k, pair) in times.windows(2).enumerate() {
        let h = (pair[1] - pair[0]).into_f64();
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    w
}

/// Best-`p` truncation error `(∫₀ᵀ (E[X_t²] − Σ_sel x_α(t)²) dt)^{1/2}` from
/// coefficient energies, with the `p` columns of largest integrated energy.
/// Negative defects from rounding are clamped at zero.
pub fn energy_truncation_error<S: Scalar>(
    table: &CoefficientTable<S>,
    p: usize,
    second_moment: impl Fn(S) -> S,
) -> Result<f64> {
    let selected = table.top_energy(p)?;
    let weights = trapezoid_weights(selected.times());
    let mut total = 0.0;
    for (&t, w) in selected.times().iter().zip(weights) {
        let defect = (second_moment(t) - selected.truncation_energy(t)?).into_f64();
        total += w * defect.max(0.0);
    }
    Ok(total.sqrt())
}
