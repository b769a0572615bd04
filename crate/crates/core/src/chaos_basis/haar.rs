//! Haar basis of `L²([0, T])` and the hat-shaped antiderivatives of its elements.
//!
//! Index `0` is the constant `1/√T`. Index `i = 2^(n-1) + j - 1` with level
//! `n ≥ 1` and position `1 ≤ j ≤ 2^(n-1)` is the wavelet supported on
//! `[T(2j-2)/2^n, T(2j)/2^n]`, positive on the left half and negative on the
//! right half, with height `√(2^(n-1)/T)`.
//!
//! Values at interior breakpoints are the left limits. At `t = 0` the value of
//! the first piece is used.

use crate::error::{domain, usage, Result};
use crate::scalar::{from_usize, Scalar};

/// Position of an element in the Haar basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HaarIndex(usize);

impl HaarIndex {
    pub const CONSTANT: HaarIndex = HaarIndex(0);

    pub fn new(i: usize) -> Self {
        HaarIndex(i)
    }

    /// Builds the index of the wavelet at level `n ≥ 1` and position `1 ≤ j ≤ 2^(n-1)`.
    /// A basis of size `2^k` holds the constant plus levels `1..=k`.
    pub fn from_level_position(level: u32, position: usize) -> Result<Self> {
        if level == 0 || level > 62 {
            return usage(format!("Haar level must lie in 1..=62, got {level}"));
        }
        let width = 1usize << (level - 1);
        if position == 0 || position > width {
            return usage(format!(
                "Haar position must lie in 1..={width} at level {level}, got {position}"
            ));
        }
        Ok(HaarIndex(width + position - 1))
    }

    /// `(n, j)` for a wavelet, `None` for the constant element.
    pub fn level_position(self) -> Option<(u32, usize)> {
        if self.0 == 0 {
            return None;
        }
        let level = usize::BITS - self.0.leading_zeros();
        let width = 1usize << (level - 1);
        Some((level, self.0 - width + 1))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl From<usize> for HaarIndex {
    fn from(i: usize) -> Self {
        HaarIndex(i)
    }
}

/// Number of complete wavelet levels in a basis of size `m`; `m` must be a power of two.
pub fn basis_levels(m: usize) -> Result<u32> {
    if m == 0 || !m.is_power_of_two() {
        return usage(format!("basis size must be a power of two, got {m}"));
    }
    Ok(m.trailing_zeros())
}

fn check_time<S: Scalar>(t: S, horizon: S) -> Result<()> {
    if !(horizon > S::zero()) || !horizon.is_finite() {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    if !(t >= S::zero() && t <= horizon) {
        return domain(format!("time {t} lies outside [0, {horizon}]"));
    }
    Ok(())
}

/// Wavelet height `√(2^(n-1)/T)`.
fn height<S: Scalar>(level: u32, horizon: S) -> S {
    (S::lit(2f64.powi(level as i32 - 1)) / horizon).sqrt()
}

/// Evaluates `e_i(t)`.
pub fn haar_eval<S: Scalar>(i: HaarIndex, t: S, horizon: S) -> Result<S> {
    check_time(t, horizon)?;
    let Some((level, j)) = i.level_position() else {
        return Ok(S::one() / horizon.sqrt());
    };
    // u = t·2^n/T; the support is [2j-2, 2j] in these units, split at 2j-1.
    let u = t * S::lit(2f64.powi(level as i32)) / horizon;
    let start = from_usize::<S>(2 * j - 2);
    let mid = from_usize::<S>(2 * j - 1);
    let end = from_usize::<S>(2 * j);
    let k = height(level, horizon);
    let inside_left = (u > start || (j == 1 && u == start)) && u <= mid;
    if inside_left {
        Ok(k)
    } else if u > mid && u <= end {
        Ok(-k)
    } else {
        Ok(S::zero())
    }
}

/// Evaluates `E_i(t) = ∫₀ᵗ e_i(s) ds`.
pub fn haar_antiderivative<S: Scalar>(i: HaarIndex, t: S, horizon: S) -> Result<S> {
    check_time(t, horizon)?;
    Ok(antiderivative_unchecked(i, t, horizon))
}

pub(crate) fn antiderivative_unchecked<S: Scalar>(i: HaarIndex, t: S, horizon: S) -> S {
    let Some((level, j)) = i.level_position() else {
        return t / horizon.sqrt();
    };
    let scale = S::lit(2f64.powi(level as i32));
    let start = from_usize::<S>(2 * j - 2) * horizon / scale;
    let mid = from_usize::<S>(2 * j - 1) * horizon / scale;
    let end = from_usize::<S>(2 * j) * horizon / scale;
    let k = height(level, horizon);
    if t <= start || t >= end {
        S::zero()
    } else if t <= mid {
        k * (t - start)
    } else {
        k * (end - t)
    }
}

/// Exact `∫₀ᵀ e_i e_j dt`, integrating cell by cell on the finest shared dyadic grid.
pub fn haar_inner_product<S: Scalar>(i: HaarIndex, j: HaarIndex, horizon: S) -> Result<S> {
    check_time(S::zero(), horizon)?;
    let level = |h: HaarIndex| h.level_position().map_or(0, |(n, _)| n);
    let finest = level(i).max(level(j));
    let cells = 1usize << finest;
    let width = horizon / from_usize::<S>(cells);
    let mut acc = S::zero();
    for c in 0..cells {
        let centre = (from_usize::<S>(c) + S::lit(0.5)) * width;
        acc += haar_eval(i, centre, horizon)? * haar_eval(j, centre, horizon)? * width;
    }
    Ok(acc)
}

/// Left side of the Haar remainder estimate,
/// `Σ_{ℓ=n+1}^{cap} Σ_j (E_{2^(ℓ-1)+j}(t)² + ∫₀ᵗ E_{2^(ℓ-1)+j}(τ)² dτ)`,
/// evaluated exactly level by level.
pub fn haar_tail_energy<S: Scalar>(level: u32, t: S, horizon: S, level_cap: u32) -> Result<S> {
    check_time(t, horizon)?;
    if level == 0 || level_cap <= level || level_cap > 62 {
        return usage(format!(
            "tail energy needs level_cap > level >= 1, got level {level}, cap {level_cap}"
        ));
    }
    let three = S::lit(3.0);
    let mut total = S::zero();
    for ell in (level + 1)..=level_cap {
        let count = 1usize << (ell - 1);
        let support = horizon / from_usize::<S>(count);
        let half = support * S::lit(0.5);
        let k2 = from_usize::<S>(count) / horizon;
        let full = S::lit(2.0) * k2 * half.powi(3) / three;

        let completed = (t / support).floor().to_usize().unwrap_or(0).min(count);
        let mut level_sum = from_usize::<S>(completed) * full;
        if completed < count {
            let r = (t - from_usize::<S>(completed) * support).max(S::zero());
            if r <= half {
                level_sum += k2 * r * r + k2 * r.powi(3) / three;
            } else {
                let rest = support - r;
                level_sum += k2 * rest * rest + k2 * (S::lit(2.0) * half.powi(3) - rest.powi(3)) / three;
            }
        }
        total += level_sum;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn level_position_round_trips() {
        for i in 1..2048usize {
            let (n, j) = HaarIndex::new(i).level_position().unwrap();
            assert!(j >= 1 && j <= 1 << (n - 1));
            assert_eq!(HaarIndex::from_level_position(n, j).unwrap().get(), i);
        }
        assert_eq!(HaarIndex::new(1).level_position(), Some((1, 1)));
        assert_eq!(HaarIndex::new(2).level_position(), Some((2, 1)));
        assert_eq!(HaarIndex::new(3).level_position(), Some((2, 2)));
        assert_eq!(HaarIndex::new(4).level_position(), Some((3, 1)));
        assert!(HaarIndex::CONSTANT.level_position().is_none());
        assert!(HaarIndex::from_level_position(2, 3).is_err());
    }

    #[test]
    fn eval_examples() {
        assert_eq!(haar_eval(HaarIndex::new(0), 0.3, 1.0).unwrap(), 1.0);
        assert_eq!(haar_eval(HaarIndex::new(1), 0.25, 1.0).unwrap(), 1.0);
        assert_eq!(haar_eval(HaarIndex::new(1), 0.75, 1.0).unwrap(), -1.0);
        assert_abs_diff_eq!(haar_eval(HaarIndex::new(2), 0.1, 1.0).unwrap(), 2f64.sqrt());
        assert!(haar_eval(HaarIndex::new(1), 1.5, 1.0).is_err());
        assert!(haar_eval(HaarIndex::new(1), -0.1, 1.0).is_err());
    }

    #[test]
    fn breakpoints_take_left_limits() {
        // interior midpoint of e_1: left limit is +1
        assert_eq!(haar_eval(HaarIndex::new(1), 0.5, 1.0).unwrap(), 1.0);
        // closed right endpoint at T
        assert_eq!(haar_eval(HaarIndex::new(1), 1.0, 1.0).unwrap(), -1.0);
        // first piece at t = 0
        assert_eq!(haar_eval(HaarIndex::new(1), 0.0, 1.0).unwrap(), 1.0);
        // e_3 lives on [0.5, 1]; at 0.5 the left limit is 0
        assert_eq!(haar_eval(HaarIndex::new(3), 0.5, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(haar_eval(HaarIndex::new(3), 0.75, 1.0).unwrap(), 2f64.sqrt());
    }

    #[test]
    fn antiderivative_examples() {
        assert_eq!(haar_antiderivative(HaarIndex::new(0), 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(haar_antiderivative(HaarIndex::new(1), 0.5, 1.0).unwrap(), 0.5);
        assert_eq!(haar_antiderivative(HaarIndex::new(1), 1.0, 1.0).unwrap(), 0.0);
        // peak of E at level n is T·2^-(n+1) when squared
        for n in 1..8u32 {
            let i = HaarIndex::from_level_position(n, 1).unwrap();
            let peak_t = 2f64.powi(-(n as i32));
            let e = haar_antiderivative(i, peak_t, 1.0).unwrap();
            assert_abs_diff_eq!(e * e, 2f64.powi(-(n as i32 + 1)), epsilon = 1e-15);
        }
    }

    #[test]
    fn antiderivative_matches_riemann_sum() {
        let horizon = 2.0;
        for i in 0..16 {
            let idx = HaarIndex::new(i);
            let steps = 1 << 12;
            let dt = horizon / steps as f64;
            let mut acc = 0.0;
            for k in 0..steps {
                acc += haar_eval(idx, (k as f64 + 0.5) * dt, horizon).unwrap() * dt;
                let t = (k + 1) as f64 * dt;
                assert_abs_diff_eq!(
                    acc,
                    haar_antiderivative(idx, t, horizon).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn orthonormal_up_to_64() {
        for i in 0..64 {
            for j in 0..64 {
                let ip = haar_inner_product(HaarIndex::new(i), HaarIndex::new(j), 1.0f64).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-12, "({i},{j}) -> {ip}");
            }
        }
    }

    #[test]
    fn tail_energy_at_zero_vanishes() {
        for n in 1..8 {
            assert_eq!(haar_tail_energy(n, 0.0, 1.0, 16).unwrap(), 0.0);
        }
    }

    #[test]
    fn tail_energy_matches_term_by_term_sum() {
        // Brute force: explicit sum over every wavelet with a fine quadrature of ∫E².
        let (horizon, t, n, cap) = (1.0, 0.3, 2, 7);
        let mut brute = 0.0;
        for ell in (n + 1)..=cap {
            for j in 1..=(1usize << (ell - 1)) {
                let idx = HaarIndex::from_level_position(ell, j).unwrap();
                let e = haar_antiderivative(idx, t, horizon).unwrap();
                brute += e * e;
                let steps = 20_000;
                let h = t / steps as f64;
                let mut integral = 0.0;
                for k in 0..=steps {
                    let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
                    let v = haar_antiderivative(idx, k as f64 * h, horizon).unwrap();
                    integral += w * v * v * h;
                }
                brute += integral;
            }
        }
        let exact = haar_tail_energy(n, t, horizon, cap).unwrap();
        assert_abs_diff_eq!(exact, brute, epsilon = 1e-8);
    }

    #[test]
    fn tail_energy_monotone_in_cap() {
        let mut prev = 0.0;
        for cap in 3..20 {
            let v = haar_tail_energy(2, 0.77, 1.0, cap).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn tail_energy_rejects_bad_levels() {
        assert!(haar_tail_energy(0, 0.5, 1.0, 4).is_err());
        assert!(haar_tail_energy(4, 0.5, 1.0, 4).is_err());
        assert!(haar_tail_energy(2, 1.5, 1.0, 4).is_err());
    }

    #[test]
    fn basis_levels_requires_power_of_two() {
        assert_eq!(basis_levels(1).unwrap(), 0);
        assert_eq!(basis_levels(32).unwrap(), 5);
        assert!(basis_levels(0).is_err());
        assert!(basis_levels(24).is_err());
    }
}
