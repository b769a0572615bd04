use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{usage, Result};
use crate::scalar::{from_usize, Scalar};

/// Brownian path sampled at `t_k = kT/2^L`, `k = 0..=2^L`, one row per component.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicPath<S> {
    horizon: S,
    level: u32,
    values: Array2<S>,
}

impl<S: Scalar> DyadicPath<S> {
    /// Wraps sampled values of shape `(d, 2^L + 1)`; every component must start at 0.
    pub fn new(horizon: S, level: u32, values: Array2<S>) -> Result<Self> {
        if !(horizon > S::zero()) {
            return usage(format!("path horizon must be positive, got {horizon}"));
        }
        if level > 30 || values.ncols() != (1usize << level) + 1 || values.nrows() == 0 {
            return usage(format!(
                "path of level {level} needs shape (d, {}), got {:?}",
                (1usize << level.min(30)) + 1,
                values.shape()
            ));
        }
        if values.column(0).iter().any(|&w| w != S::zero()) {
            return usage("Brownian path must start at 0");
        }
        Ok(DyadicPath { horizon, level, values })
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Number of increments, `2^L`.
    pub fn steps(&self) -> usize {
        1 << self.level
    }

    pub fn dt(&self) -> S {
        self.horizon / from_usize::<S>(self.steps())
    }

    pub fn time(&self, k: usize) -> S {
        self.horizon * from_usize::<S>(k) / from_usize::<S>(self.steps())
    }

    pub fn component(&self, c: usize) -> ArrayView1<'_, S> {
        self.values.row(c)
    }

    pub fn values(&self) -> &Array2<S> {
        &self.values
    }

    /// Grid index of `t`, which must coincide with a grid point.
    pub fn grid_index(&self, t: S) -> Result<usize> {
        grid_index(t, self.horizon, self.level)
    }
}

pub(crate) fn grid_index<S: Scalar>(t: S, horizon: S, level: u32) -> Result<usize> {
    let steps = 1usize << level;
    let pos = t / horizon * from_usize::<S>(steps);
    let k = pos.round();
    let tol = S::lit(1e-6).max(S::epsilon() * from_usize::<S>(64 * steps));
    if !(t >= S::zero() && t <= horizon) || (pos - k).abs() > tol {
        return usage(format!("time {t} is not a point of the level-{level} grid on [0, {horizon}]"));
    }
    Ok(k.to_usize().unwrap_or(0))
}

/// Independent generator for stream `stream` under master `seed`.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples a `d`-dimensional path at level `L` from stream 0 of `seed`.
pub fn sample_brownian<S: Scalar>(level: u32, horizon: S, d: usize, seed: u64) -> DyadicPath<S> {
    let mut rng = path_rng(seed, 0);
    sample_brownian_with(&mut rng, level, horizon, d)
}

/// Samples a path from an existing generator; increments are iid `N(0, T/2^L)`.
pub fn sample_brownian_with<S: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    level: u32,
    horizon: S,
    d: usize,
) -> DyadicPath<S> {
    let steps = 1usize << level;
    let sd = (horizon.into_f64() / steps as f64).sqrt();
    let mut values = Array2::<S>::zeros((d, steps + 1));
    for mut row in values.rows_mut() {
        let mut w = 0.0f64;
        for k in 1..=steps {
            let z: f64 = rng.sample(StandardNormal);
            w += sd * z;
            row[k] = S::lit(w);
        }
    }
    DyadicPath { horizon, level, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_zero_and_is_deterministic() {
        let a = sample_brownian::<f64>(6, 2.0, 2, 17);
        let b = sample_brownian::<f64>(6, 2.0, 2, 17);
        assert_eq!(a, b);
        assert_eq!(a.component(0)[0], 0.0);
        assert_eq!(a.component(1)[0], 0.0);
        assert_eq!(a.values().ncols(), 65);
        assert_ne!(a, sample_brownian::<f64>(6, 2.0, 2, 18));
    }

    #[test]
    fn grid_index_checks_alignment() {
        let p = sample_brownian::<f64>(4, 1.0, 1, 0);
        assert_eq!(p.grid_index(0.25).unwrap(), 4);
        assert_eq!(p.grid_index(1.0).unwrap(), 16);
        assert!(p.grid_index(0.3).is_err());
        assert!(p.grid_index(1.5).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DyadicPath::new(1.0, 2, Array2::<f64>::zeros((1, 4))).is_err());
        let mut v = Array2::<f64>::zeros((1, 5));
        v[[0, 0]] = 0.1;
        assert!(DyadicPath::new(1.0, 2, v).is_err());
    }
}
