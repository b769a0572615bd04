//! Pathwise encoder `W ↦ (G_i)` with `G_i = ∫₀ᵀ e_i dW`, its inverse partial
//! sum, and chaos polynomials `Ψ_α = ∏ H_{α_i}(G_i)`.

use super::haar::{antiderivative_unchecked, basis_levels, HaarIndex};
use super::hermite::hermite_table;
use super::multi_index::MultiIndex;
use crate::error::{domain, usage, Result};
use crate::scalar::Scalar;
use crate::sde_lab::DyadicPath;

/// Encoded Gaussian features of one path. For a `d`-dimensional path the
/// features of component `c` occupy `values[c·m .. (c+1)·m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianFeatures<S> {
    values: Vec<S>,
    basis_size: usize,
    horizon: S,
}

impl<S: Scalar> GaussianFeatures<S> {
    pub fn new(values: Vec<S>, basis_size: usize, horizon: S) -> Result<Self> {
        basis_levels(basis_size)?;
        if values.is_empty() || values.len() % basis_size != 0 {
            return usage(format!(
                "feature length {} is not a positive multiple of the basis size {basis_size}",
                values.len()
            ));
        }
        Ok(GaussianFeatures { values, basis_size, horizon })
    }

    pub fn basis_size(&self) -> usize {
        self.basis_size
    }

    pub fn components(&self) -> usize {
        self.values.len() / self.basis_size
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn as_slice(&self) -> &[S] {
        &self.values
    }

    pub fn component(&self, c: usize) -> &[S] {
        &self.values[c * self.basis_size..(c + 1) * self.basis_size]
    }

    pub fn into_vec(self) -> Vec<S> {
        self.values
    }
}

/// Encodes every component of `path` onto the first `m` Haar elements.
pub fn encode_path<S: Scalar>(path: &DyadicPath<S>, m: usize) -> Result<GaussianFeatures<S>> {
    let mut values = vec![S::zero(); m * path.dim()];
    for (c, chunk) in values.chunks_mut(m).enumerate() {
        encode_component_into(path, c, m, chunk)?;
    }
    GaussianFeatures::new(values, m, path.horizon())
}

/// Writes `G_0 .. G_{m-1}` of component `c` into `out`.
pub fn encode_component_into<S: Scalar>(
    path: &DyadicPath<S>,
    c: usize,
    m: usize,
    out: &mut [S],
) -> Result<()> {
    let levels = basis_levels(m)?;
    if levels > path.level() {
        return usage(format!(
            "basis size {m} needs a path of level >= {levels}, got level {}",
            path.level()
        ));
    }
    if out.len() != m || c >= path.dim() {
        return usage("encoder output buffer or component out of range");
    }
    let w = path.component(c);
    let horizon = path.horizon();
    let root_t = horizon.sqrt();
    out[0] = w[w.len() - 1] / root_t;
    for n in 1..=levels {
        // grid points per 1/2^n of the horizon
        let stride = 1usize << (path.level() - n);
        let scale = S::lit(2f64.powf((n as f64 - 1.0) / 2.0)) / root_t;
        let width = 1usize << (n - 1);
        for j in 1..=width {
            let a = w[(2 * j - 2) * stride];
            let b = w[(2 * j - 1) * stride];
            let e = w[(2 * j) * stride];
            out[width + j - 1] = scale * ((b - a) - (e - b));
        }
    }
    Ok(())
}

/// Partial sum `Σ_i g_i·E_i(t)`; exact at dyadic points of level `log₂ m`.
pub fn reconstruct_path<S: Scalar>(g: &[S], t: S, horizon: S) -> Result<S> {
    if !(horizon > S::zero()) || !(t >= S::zero() && t <= horizon) {
        return domain(format!("time {t} lies outside [0, {horizon}]"));
    }
    Ok(g.iter()
        .enumerate()
        .map(|(i, &gi)| gi * antiderivative_unchecked(HaarIndex::new(i), t, horizon))
        .sum())
}

/// `Ψ_α(g) = ∏_i H_{α_i}(g_i)`.
pub fn chaos_poly_eval<S: Scalar>(alpha: &MultiIndex, g: &[S]) -> Result<S> {
    if alpha.len() > g.len() {
        return usage(format!(
            "multi-index over {} slots applied to {} features",
            alpha.len(),
            g.len()
        ));
    }
    Ok(alpha
        .support()
        .map(|(i, a)| super::hermite::hermite_eval(a as usize, g[i]))
        .fold(S::one(), |acc, h| acc * h))
}

/// Precomputed `H_n(g_i)` for evaluating many chaos polynomials at one feature vector.
#[derive(Clone, Debug)]
pub struct HermiteCache<S> {
    tables: Vec<Vec<S>>,
}

impl<S: Scalar> HermiteCache<S> {
    pub fn new(g: &[S], max_degree: u32) -> Self {
        HermiteCache { tables: g.iter().map(|&x| hermite_table(max_degree as usize, x)).collect() }
    }

    pub fn max_degree(&self) -> usize {
        self.tables.first().map_or(0, |t| t.len() - 1)
    }

    /// `Ψ_α`; `α` must fit the cached length and degree.
    pub fn eval(&self, alpha: &MultiIndex) -> Result<S> {
        if alpha.len() > self.tables.len() {
            return usage("multi-index longer than the cached feature vector");
        }
        let mut acc = S::one();
        for (i, a) in alpha.support() {
            match self.tables[i].get(a as usize) {
                Some(&h) => acc *= h,
                None => return usage(format!("degree {a} exceeds the cached maximum")),
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_lab::{sample_brownian, DyadicPath};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn path_from(values: &[f64], horizon: f64) -> DyadicPath<f64> {
        let level = (values.len() - 1).trailing_zeros();
        DyadicPath::new(horizon, level, Array2::from_shape_vec((1, values.len()), values.to_vec()).unwrap())
            .unwrap()
    }

    #[test]
    fn linear_path_encodes_to_unit_constant() {
        let path = path_from(&[0.0, 0.25, 0.5, 0.75, 1.0], 1.0);
        let g = encode_path(&path, 2).unwrap();
        assert_abs_diff_eq!(g.as_slice()[0], 1.0);
        assert_abs_diff_eq!(g.as_slice()[1], 0.0);
    }

    #[test]
    fn zero_path_encodes_to_zero() {
        let path = path_from(&[0.0; 9], 1.0);
        assert!(encode_path(&path, 8).unwrap().as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn hand_worked_reconstruction() {
        let path = path_from(&[0.0, 0.5, -0.2], 1.0);
        let g = encode_path(&path, 2).unwrap();
        assert_abs_diff_eq!(g.as_slice()[0], -0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(g.as_slice()[1], 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(reconstruct_path(g.as_slice(), 0.5, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(reconstruct_path(&[0.0, 0.0], 0.3, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn reconstruction_exact_on_dyadic_points() {
        for seed in 0..20 {
            let horizon = 1.5;
            let path = sample_brownian::<f64>(8, horizon, 1, seed);
            for m in [1usize, 2, 8, 64] {
                let g = encode_path(&path, m).unwrap();
                let stride = 256 / m;
                for q in 0..=m {
                    let k = q * stride;
                    let t = path.time(k);
                    let r = reconstruct_path(g.as_slice(), t, horizon).unwrap();
                    assert!((r - path.component(0)[k]).abs() < 1e-12, "m={m} k={k}");
                }
            }
        }
    }

    #[test]
    fn resolution_is_checked() {
        let path = sample_brownian::<f64>(3, 1.0, 1, 1);
        assert!(encode_path(&path, 16).is_err());
        assert!(encode_path(&path, 6).is_err());
    }

    #[test]
    fn multi_component_layout() {
        let path = sample_brownian::<f64>(5, 1.0, 3, 9);
        let g = encode_path(&path, 4).unwrap();
        assert_eq!(g.components(), 3);
        let mut single = vec![0.0; 4];
        encode_component_into(&path, 2, 4, &mut single).unwrap();
        assert_eq!(g.component(2), single.as_slice());
    }

    #[test]
    fn chaos_poly_examples() {
        let g = [0.7, -1.1, 1.0];
        assert_eq!(chaos_poly_eval(&MultiIndex::zeros(3), &g).unwrap(), 1.0);
        assert_abs_diff_eq!(chaos_poly_eval(&MultiIndex::new(vec![1, 1]), &g).unwrap(), 0.7 * -1.1);
        assert_abs_diff_eq!(chaos_poly_eval(&MultiIndex::new(vec![0, 0, 2]), &g).unwrap(), 0.0, epsilon = 1e-15);
        assert!(chaos_poly_eval(&MultiIndex::zeros(4), &g).is_err());
        let cache = HermiteCache::new(&g, 3);
        let a = MultiIndex::new(vec![2, 1, 3]);
        assert_abs_diff_eq!(cache.eval(&a).unwrap(), chaos_poly_eval(&a, &g).unwrap(), epsilon = 1e-15);
        assert!(cache.eval(&MultiIndex::new(vec![4])).is_err());
    }
}
