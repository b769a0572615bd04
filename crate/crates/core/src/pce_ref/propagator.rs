use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;

use crate::chaos_basis::{basis_levels, binomial, enumerate_multi_indices, haar_eval, HaarIndex, MultiIndex};
use crate::error::{usage, Error, Result};
use crate::scalar::{from_usize, Scalar};
use crate::sde_lab::{SdeKind, SdeSpec};

use super::table::{uniform_grid, CoefficientTable};

/// Largest index set [`propagator_solve`] enumerates on its own.
pub const MAX_PROPAGATOR_INDICES: u128 = 250_000;

pub type TimeFn<S> = Arc<dyn Fn(S) -> S + Send + Sync>;

/// Scalar affine SDE `dX = (a(t)X + b(t))dt + (c(t)X + h(t))dW`.
#[derive(Clone)]
pub struct AffineSdeCoeffs<S> {
    pub a: TimeFn<S>,
    pub b: TimeFn<S>,
    pub c: TimeFn<S>,
    pub h: TimeFn<S>,
}

impl<S> fmt::Debug for AffineSdeCoeffs<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AffineSdeCoeffs { .. }")
    }
}

impl<S: Scalar> AffineSdeCoeffs<S> {
    pub fn constant(a: S, b: S, c: S, h: S) -> Self {
        AffineSdeCoeffs {
            a: Arc::new(move |_| a),
            b: Arc::new(move |_| b),
            c: Arc::new(move |_| c),
            h: Arc::new(move |_| h),
        }
    }

    /// `a = −θ, b = θμ̄, c = 0, h = σ`.
    pub fn ornstein_uhlenbeck(theta: S, mean: S, sigma: S) -> Self {
        Self::constant(-theta, theta * mean, S::zero(), sigma)
    }

    /// `a = μ, c = σ, b = h = 0`.
    pub fn geometric_brownian(mu: S, sigma: S) -> Self {
        Self::constant(mu, S::zero(), sigma, S::zero())
    }

    /// Coefficients of a one-dimensional OU or GBM specification.
    pub fn from_spec(spec: &SdeSpec<S>) -> Result<Self> {
        match spec.kind() {
            SdeKind::OrnsteinUhlenbeck { theta, mean, sigma } => Ok(Self::ornstein_uhlenbeck(*theta, *mean, *sigma)),
            SdeKind::GeometricBrownian { mu, sigma } => Ok(Self::geometric_brownian(*mu, *sigma)),
            _ => usage("the propagator needs a scalar affine SDE (OU or GBM)"),
        }
    }
}

/// Integrates the propagator system over the full set `I_{p,m}` with RK4,
/// reporting coefficients on `n_t` uniform times in `[0, T]`.
pub fn propagator_solve<S: Scalar>(
    coeffs: &AffineSdeCoeffs<S>,
    x0: S,
    p: u32,
    m: usize,
    horizon: S,
    n_t: usize,
    ode_step: S,
) -> Result<CoefficientTable<S>> {
    basis_levels(m)?;
    let count = binomial(u64::from(p) + m as u64, m as u64);
    if count > MAX_PROPAGATOR_INDICES {
        return usage(format!(
            "I_{{{p},{m}}} has {count} indices; pass a smaller downward-closed set to propagator_solve_on"
        ));
    }
    propagator_solve_on(coeffs, x0, enumerate_multi_indices(p, m), m, horizon, n_t, ode_step)
}

/// Propagator system restricted to `indices`, which must contain `0` and be
/// closed under `α ↦ α − e_j`. Integration segments are split at the output
/// times and at every multiple of `T/m`, so each `e_j` is constant on a
/// segment; each segment takes `⌈len/ode_step⌉` equal RK4 steps.
pub fn propagator_solve_on<S: Scalar>(
    coeffs: &AffineSdeCoeffs<S>,
    x0: S,
    indices: Vec<MultiIndex>,
    m: usize,
    horizon: S,
    n_t: usize,
    ode_step: S,
) -> Result<CoefficientTable<S>> {
    basis_levels(m)?;
    if !(ode_step > S::zero()) || !ode_step.is_finite() {
        return usage(format!("ode step must be positive, got {ode_step}"));
    }
    let times = uniform_grid(horizon, n_t)?;
    let system = System::new(&indices, m)?;

    let mut knots: Vec<S> = times.clone();
    knots.extend((1..m).map(|k| horizon * from_usize::<S>(k) / from_usize::<S>(m)));
    knots.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    knots.dedup_by(|a, b| (*a - *b).abs() <= S::epsilon() * horizon * S::lit(16.0));

    let mut values = Array2::zeros((times.len(), indices.len()));
    let mut state = vec![S::zero(); indices.len()];
    state[system.zero] = x0;
    values.row_mut(0).assign(&ndarray::ArrayView1::from(&state));
    let mut next_output = 1;
    let mut work = Rk4Work::new(indices.len());
    let mut e = vec![S::zero(); m];
    for seg in knots.windows(2) {
        let (t0, t1) = (seg[0], seg[1]);
        let mid = (t0 + t1) * S::lit(0.5);
        for (j, ej) in e.iter_mut().enumerate() {
            *ej = haar_eval(HaarIndex::new(j), mid, horizon)?;
        }
        let steps = ((t1 - t0) / ode_step).ceil().to_usize().unwrap_or(1).max(1);
        let dt = (t1 - t0) / from_usize::<S>(steps);
        for s in 0..steps {
            let t = t0 + dt * from_usize::<S>(s);
            work.step(&system, coeffs, &e, t, dt, &mut state);
        }
        if let Some(j) = state.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoefficient { t: t1.into_f64(), index: indices[j].to_string() });
        }
        while next_output < times.len() && (times[next_output] - t1).abs() <= S::epsilon() * horizon * S::lit(16.0) {
            values.row_mut(next_output).assign(&ndarray::ArrayView1::from(&state));
            next_output += 1;
        }
    }
    debug_assert_eq!(next_output, times.len());
    CoefficientTable::new(times, m, indices, values)
}

/// Parent links `(slot, √α_j, position of α − e_j)` per index.
struct System<S> {
    parents: Vec<Vec<(usize, S, usize)>>,
    zero: usize,
}

impl<S: Scalar> System<S> {
    fn new(indices: &[MultiIndex], m: usize) -> Result<Self> {
        let mut position = HashMap::with_capacity(indices.len());
        for (k, alpha) in indices.iter().enumerate() {
            if alpha.len() != m {
                return usage(format!("multi-index {alpha} does not have {m} slots"));
            }
            position.insert(alpha, k);
        }
        let zero = *position
            .get(&MultiIndex::zeros(m))
            .ok_or_else(|| Error::Usage("the index set must contain the zero multi-index".into()))?;
        let mut parents = Vec::with_capacity(indices.len());
        for alpha in indices {
            let mut links = Vec::new();
            for (slot, a) in alpha.support() {
                let parent = alpha.decrement(slot).expect("positive entry");
                let Some(&k) = position.get(&parent) else {
                    return usage(format!("index set is not closed under decrements: {alpha} lacks {parent}"));
                };
                links.push((slot, from_usize::<S>(a as usize).sqrt(), k));
            }
            parents.push(links);
        }
        Ok(System { parents, zero })
    }

    /// `dx_α = a x_α + b·1{α=0} + Σ_j √α_j e_j (c x_{α−e_j} + h·1{α−e_j=0})`.
    fn rhs(&self, coeffs: &AffineSdeCoeffs<S>, e: &[S], t: S, x: &[S], out: &mut [S]) {
        let (a, b, c, h) = ((coeffs.a)(t), (coeffs.b)(t), (coeffs.c)(t), (coeffs.h)(t));
        for (k, links) in self.parents.iter().enumerate() {
            let mut d = a * x[k];
            for &(slot, root, parent) in links {
                let ej = e[slot];
                if ej != S::zero() {
                    let mut sigma = c * x[parent];
                    if parent == self.zero {
                        sigma += h;
                    }
                    d += root * ej * sigma;
                }
            }
            out[k] = d;
        }
        out[self.zero] += b;
    }
}

struct Rk4Work<S> {
    k1: Vec<S>,
    k2: Vec<S>,
    k3: Vec<S>,
    k4: Vec<S>,
    tmp: Vec<S>,
}

impl<S: Scalar> Rk4Work<S> {
    fn new(n: usize) -> Self {
        Rk4Work { k1: vec![S::zero(); n], k2: vec![S::zero(); n], k3: vec![S::zero(); n], k4: vec![S::zero(); n], tmp: vec![S::zero(); n] }
    }

    fn step(&mut self, sys: &System<S>, coeffs: &AffineSdeCoeffs<S>, e: &[S], t: S, dt: S, x: &mut [S]) {
        let half = dt * S::lit(0.5);
        sys.rhs(coeffs, e, t, x, &mut self.k1);
        axpy(&mut self.tmp, x, half, &self.k1);
        sys.rhs(coeffs, e, t + half, &self.tmp, &mut self.k2);
        axpy(&mut self.tmp, x, half, &self.k2);
        sys.rhs(coeffs, e, t + half, &self.tmp, &mut self.k3);
        axpy(&mut self.tmp, x, dt, &self.k3);
        sys.rhs(coeffs, e, t + dt, &self.tmp, &mut self.k4);
        let sixth = dt / S::lit(6.0);
        for i in 0..x.len() {
            x[i] += sixth * (self.k1[i] + S::lit(2.0) * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

fn axpy<S: Scalar>(out: &mut [S], x: &[S], a: S, y: &[S]) {
    for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}
