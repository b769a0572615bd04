//! Monte-Carlo error norms and distances between empirical measures.

mod sinkhorn;

pub use sinkhorn::{median_pairwise_cost, sinkhorn_divergence, SinkhornOutcome, SinkhornParams};

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{usage, Result};
use crate::scalar::Scalar;

/// `n` points in `R^d` carrying uniform weights `1/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleCloud<S> {
    points: Array2<S>,
}

impl<S: Scalar> SampleCloud<S> {
    /// Rows of `points` are the samples.
    pub fn new(points: Array2<S>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return usage("a sample cloud needs at least one point of positive dimension");
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return usage(format!("sample cloud entry {pos} is not finite"));
        }
        Ok(SampleCloud { points })
    }

    /// One-dimensional cloud.
    pub fn from_values(values: &[S]) -> Result<Self> {
        Self::new(Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("column shape"))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, S> {
        self.points.view()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, S> {
        self.points.row(i)
    }
}

/// Root mean square `(1/N Σ |F^i|²)^{1/2}`.
pub fn mc_l2<S: Scalar>(values: &[S]) -> Result<S> {
    if values.is_empty() {
        return usage("mc_l2 of an empty sample");
    }
    let sum: S = values.iter().map(|&v| v * v).sum();
    Ok((sum / crate::scalar::from_usize(values.len())).sqrt())
}

/// Wasserstein-2 distance between equal-size one-dimensional clouds via
/// order statistics.
pub fn w2_1d<S: Scalar>(a: &SampleCloud<S>, b: &SampleCloud<S>) -> Result<S> {
    if a.dim() != 1 || b.dim() != 1 {
        return usage("w2_1d needs one-dimensional clouds");
    }
    if a.len() != b.len() {
        return usage(format!("w2_1d needs equal sample counts, got {} and {}", a.len(), b.len()));
    }
    let sorted = |c: &SampleCloud<S>| {
        let mut v: Vec<S> = c.points.iter().copied().collect();
        v.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        v
    };
    let gaps: Vec<S> = sorted(a).into_iter().zip(sorted(b)).map(|(x, y)| x - y).collect();
    mc_l2(&gaps)
}
