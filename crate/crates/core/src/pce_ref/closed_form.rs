use std::collections::BTreeSet;

use crate::chaos_basis::{basis_levels, enumerate_on_slots, haar_antiderivative, HaarIndex, MultiIndex};
use crate::error::{domain, Result};
use crate::scalar::{from_usize, Scalar};

use super::table::CoefficientTable;

fn check_time<S: Scalar>(t: S, horizon: S) -> Result<()> {
    if !(horizon > S::zero()) || !(t >= S::zero() && t <= horizon) {
        return domain(format!("time {t} lies outside [0, {horizon}]"));
    }
    Ok(())
}

/// `∫_u^{min(v,t)} e^{−θ(t−s)} ds`, zero when `t ≤ u`.
fn damped_integral<S: Scalar>(theta: S, t: S, u: S, v: S) -> S {
    if t <= u {
        return S::zero();
    }
    let w = if v < t { v } else { t };
    if theta == S::zero() {
        return w - u;
    }
    -(-theta * (t - w)).exp() * (-theta * (w - u)).exp_m1() / theta
}

/// Chaos coefficient of `dX = −θ(X − μ̄)dt + σ dW`, `X_0 = x0`.
pub fn ou_coeff<S: Scalar>(alpha: &MultiIndex, t: S, theta: S, mean: S, sigma: S, x0: S, horizon: S) -> Result<S> {
    check_time(t, horizon)?;
    match alpha.degree() {
        0 => Ok(mean + (x0 - mean) * (-theta * t).exp()),
        1 => {
            let (slot, _) = alpha.support().next().expect("degree one");
            let i = HaarIndex::new(slot);
            let Some((level, j)) = i.level_position() else {
                return Ok(sigma * damped_integral(theta, t, S::zero(), horizon) / horizon.sqrt());
            };
            let scale = S::lit(2f64.powi(level as i32));
            let start = from_usize::<S>(2 * j - 2) * horizon / scale;
            let mid = from_usize::<S>(2 * j - 1) * horizon / scale;
            let end = from_usize::<S>(2 * j) * horizon / scale;
            let k = (S::lit(2f64.powi(level as i32 - 1)) / horizon).sqrt();
            Ok(sigma * k * (damped_integral(theta, t, start, mid) - damped_integral(theta, t, mid, end)))
        }
        _ => Ok(S::zero()),
    }
}

/// Chaos coefficient of `dX = μX dt + σX dW`:
/// `x0·e^{μt}·∏_i (σE_i(t))^{α_i}/√(α_i!)`.
pub fn gbm_coeff<S: Scalar>(alpha: &MultiIndex, t: S, mu: S, sigma: S, x0: S, horizon: S) -> Result<S> {
    check_time(t, horizon)?;
    let mut value = x0 * (mu * t).exp();
    for (slot, a) in alpha.support() {
        let e = haar_antiderivative(HaarIndex::new(slot), t, horizon)?;
        let mut factor = S::one();
        for r in 1..=a {
            factor *= sigma * e / from_usize::<S>(r as usize).sqrt();
        }
        value *= factor;
    }
    Ok(value)
}

/// `E[X_t²] = x0²·e^{(2μ+σ²)t}` for geometric Brownian motion.
pub fn gbm_second_moment<S: Scalar>(t: S, mu: S, sigma: S, x0: S) -> S {
    x0 * x0 * ((S::lit(2.0) * mu + sigma * sigma) * t).exp()
}

/// `E[X_t²]` for the Ornstein–Uhlenbeck process.
pub fn ou_second_moment<S: Scalar>(t: S, theta: S, mean: S, sigma: S, x0: S) -> S {
    let m = mean + (x0 - mean) * (-theta * t).exp();
    let var = if theta == S::zero() {
        sigma * sigma * t
    } else {
        -sigma * sigma * (S::lit(-2.0) * theta * t).exp_m1() / (S::lit(2.0) * theta)
    };
    m * m + var
}

/// Haar slots `i < m` with `E_i(t) ≠ 0`: the constant (for `t > 0`) and at
/// most one wavelet per level.
pub fn active_slots<S: Scalar>(t: S, m: usize, horizon: S) -> Result<Vec<usize>> {
    basis_levels(m)?;
    check_time(t, horizon)?;
    let mut slots = Vec::new();
    for i in 0..m {
        if haar_antiderivative(HaarIndex::new(i), t, horizon)? != S::zero() {
            slots.push(i);
        }
    }
    Ok(slots)
}

/// Every `α ∈ I_{p,m}` whose GBM coefficient is nonzero at some grid time,
/// plus `α = 0`, in canonical order. This set is closed under decrements.
pub fn gbm_index_set<S: Scalar>(p: u32, m: usize, horizon: S, times: &[S]) -> Result<Vec<MultiIndex>> {
    let mut set = BTreeSet::new();
    set.insert(MultiIndex::zeros(m));
    for &t in times {
        let slots = active_slots(t, m, horizon)?;
        set.extend(enumerate_on_slots(p, m, &slots));
    }
    Ok(set.into_iter().collect())
}

/// GBM coefficient table over [`gbm_index_set`]; columns of `I_{p,m}` that
/// vanish at every grid time are omitted.
pub fn gbm_table<S: Scalar>(mu: S, sigma: S, x0: S, p: u32, m: usize, times: Vec<S>) -> Result<CoefficientTable<S>> {
    let horizon = *times.last().ok_or_else(|| crate::Error::Usage("empty time grid".into()))?;
    let indices = gbm_index_set(p, m, horizon, &times)?;
    let mut err = None;
    let table = CoefficientTable::from_fn(times, m, indices, |alpha, t| {
        gbm_coeff(alpha, t, mu, sigma, x0, horizon).unwrap_or_else(|e| {
            err.get_or_insert(e);
            S::nan()
        })
    })?;
    err.map_or(Ok(table), Err)
}

/// OU coefficient table over `I_{1,m}`; higher chaoses vanish identically.
pub fn ou_table<S: Scalar>(theta: S, mean: S, sigma: S, x0: S, m: usize, times: Vec<S>) -> Result<CoefficientTable<S>> {
    let horizon = *times.last().ok_or_else(|| crate::Error::Usage("empty time grid".into()))?;
    basis_levels(m)?;
    let indices = crate::chaos_basis::enumerate_multi_indices(1, m);
    let mut err = None;
    let table = CoefficientTable::from_fn(times, m, indices, |alpha, t| {
        ou_coeff(alpha, t, theta, mean, sigma, x0, horizon).unwrap_or_else(|e| {
            err.get_or_insert(e);
            S::nan()
        })
    })?;
    err.map_or(Ok(table), Err)
}
