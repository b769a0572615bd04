//! Normalised probabilists' Hermite polynomials, orthonormal under `N(0, 1)`.

use crate::scalar::{from_usize, Scalar};

/// `H_n(x)` via `H_{n+1} = (x·H_n − √n·H_{n−1}) / √(n+1)`.
pub fn hermite_eval<S: Scalar>(n: usize, x: S) -> S {
    let mut prev = S::zero();
    let mut cur = S::one();
    for k in 0..n {
        let next = (x * cur - from_usize::<S>(k).sqrt() * prev) / from_usize::<S>(k + 1).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `[H_0(x), …, H_max(x)]` in one sweep of the recurrence.
pub fn hermite_table<S: Scalar>(max_degree: usize, x: S) -> Vec<S> {
    let mut out = Vec::with_capacity(max_degree + 1);
    out.push(S::one());
    if max_degree >= 1 {
        out.push(x);
    }
    for k in 1..max_degree {
        let next = (x * out[k] - from_usize::<S>(k).sqrt() * out[k - 1]) / from_usize::<S>(k + 1).sqrt();
        out.push(next);
    }
    out
}
