use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};

use super::brownian::DyadicPath;
use crate::error::{usage, Error, Result};
use crate::scalar::Scalar;

/// `μ(t, x)` written into the output slice.
pub type DriftFn<S> = Arc<dyn Fn(S, &[S], &mut [S]) + Send + Sync>;
/// `σ(t, x)` written row-major into a `d × d` output slice.
pub type DiffusionFn<S> = Arc<dyn Fn(S, &[S], &mut [S]) + Send + Sync>;

/// Drift/diffusion family of a benchmark SDE.
#[derive(Clone)]
pub enum SdeKind<S> {
    /// `dX = −θ(X − μ̄)dt + σ dW`.
    OrnsteinUhlenbeck { theta: S, mean: S, sigma: S },
    /// `dX = μX dt + σX dW`.
    GeometricBrownian { mu: S, sigma: S },
    /// `dX = −Σ⁻¹(X − μ)dt + √2 dB`.
    GaussianLangevin { covariance: Array2<S>, mean: Array1<S> },
    /// User-supplied coefficients; they are responsible for linear growth and Lipschitz continuity.
    Custom { drift: DriftFn<S>, diffusion: DiffusionFn<S> },
}

impl<S: fmt::Debug> fmt::Debug for SdeKind<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SdeKind::OrnsteinUhlenbeck { theta, mean, sigma } => f
                .debug_struct("OrnsteinUhlenbeck")
                .field("theta", theta)
                .field("mean", mean)
                .field("sigma", sigma)
                .finish(),
            SdeKind::GeometricBrownian { mu, sigma } => {
                f.debug_struct("GeometricBrownian").field("mu", mu).field("sigma", sigma).finish()
            }
            SdeKind::GaussianLangevin { covariance, mean } => f
                .debug_struct("GaussianLangevin")
                .field("covariance", covariance)
                .field("mean", mean)
                .finish(),
            SdeKind::Custom { .. } => f.write_str("Custom"),
        }
    }
}

/// A validated SDE with initial state and horizon.
#[derive(Clone, Debug)]
pub struct SdeSpec<S> {
    kind: SdeKind<S>,
    x0: Vec<S>,
    horizon: S,
    precision: Option<Array2<S>>,
}

impl<S: Scalar> SdeSpec<S> {
    pub fn ornstein_uhlenbeck(theta: S, mean: S, sigma: S, x0: S, horizon: S) -> Result<Self> {
        if !(theta > S::zero()) || !(sigma > S::zero()) {
            return usage(format!("OU needs theta > 0 and sigma > 0, got {theta}, {sigma}"));
        }
        Self::finish(SdeKind::OrnsteinUhlenbeck { theta, mean, sigma }, vec![x0], horizon, None)
    }

    pub fn geometric_brownian(mu: S, sigma: S, x0: S, horizon: S) -> Result<Self> {
        if !(sigma > S::zero()) {
            return usage(format!("GBM needs sigma > 0, got {sigma}"));
        }
        Self::finish(SdeKind::GeometricBrownian { mu, sigma }, vec![x0], horizon, None)
    }

    pub fn gaussian_langevin(covariance: Array2<S>, mean: Array1<S>, x0: Vec<S>, horizon: S) -> Result<Self> {
        let d = mean.len();
        if covariance.dim() != (d, d) || x0.len() != d || d == 0 {
            return usage("Langevin covariance, mean and x0 dimensions disagree");
        }
        let precision = spd_inverse(&covariance)?;
        Self::finish(SdeKind::GaussianLangevin { covariance, mean }, x0, horizon, Some(precision))
    }

    pub fn custom(drift: DriftFn<S>, diffusion: DiffusionFn<S>, x0: Vec<S>, horizon: S) -> Result<Self> {
        if x0.is_empty() {
            return usage("custom SDE needs a non-empty initial state");
        }
        Self::finish(SdeKind::Custom { drift, diffusion }, x0, horizon, None)
    }

    fn finish(kind: SdeKind<S>, x0: Vec<S>, horizon: S, precision: Option<Array2<S>>) -> Result<Self> {
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return usage(format!("horizon must be positive, got {horizon}"));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return usage("initial state must be finite");
        }
        Ok(SdeSpec { kind, x0, horizon, precision })
    }

    pub fn kind(&self) -> &SdeKind<S> {
        &self.kind
    }

    pub fn x0(&self) -> &[S] {
        &self.x0
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// True for the variants with a pathwise closed form (OU, GBM).
    pub fn has_exact_solution(&self) -> bool {
        matches!(self.kind, SdeKind::OrnsteinUhlenbeck { .. } | SdeKind::GeometricBrownian { .. })
    }

    pub fn drift(&self, t: S, x: &[S], out: &mut [S]) {
        match &self.kind {
            SdeKind::OrnsteinUhlenbeck { theta, mean, .. } => out[0] = -*theta * (x[0] - *mean),
            SdeKind::GeometricBrownian { mu, .. } => out[0] = *mu * x[0],
            SdeKind::GaussianLangevin { mean, .. } => {
                let p = self.precision.as_ref().expect("Langevin precision");
                for (i, o) in out.iter_mut().enumerate() {
                    *o = -(0..x.len()).map(|j| p[[i, j]] * (x[j] - mean[j])).sum::<S>();
                }
            }
            SdeKind::Custom { drift, .. } => drift(t, x, out),
        }
    }

    /// Writes `σ(t, x)·dw` into `out`; `scratch` must hold `d²` entries for custom SDEs.
    pub fn diffusion_times(&self, t: S, x: &[S], dw: &[S], out: &mut [S], scratch: &mut [S]) {
        match &self.kind {
            SdeKind::OrnsteinUhlenbeck { sigma, .. } => out[0] = *sigma * dw[0],
            SdeKind::GeometricBrownian { sigma, .. } => out[0] = *sigma * x[0] * dw[0],
            SdeKind::GaussianLangevin { .. } => {
                let r2 = S::lit(2.0).sqrt();
                for (o, &w) in out.iter_mut().zip(dw) {
                    *o = r2 * w;
                }
            }
            SdeKind::Custom { diffusion, .. } => {
                let d = x.len();
                diffusion(t, x, scratch);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..d).map(|j| scratch[i * d + j] * dw[j]).sum();
                }
            }
        }
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
fn spd_inverse<S: Scalar>(a: &Array2<S>) -> Result<Array2<S>> {
    let d = a.nrows();
    let tol = S::lit(1e-12).max(S::epsilon());
    for i in 0..d {
        for j in 0..i {
            if (a[[i, j]] - a[[j, i]]).abs() > tol * (S::one() + a[[i, j]].abs()) {
                return usage("covariance must be symmetric");
            }
        }
    }
    let mut l = Array2::<S>::zeros((d, d));
    for i in 0..d {
        for j in 0..=i {
            let s: S = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
            if i == j {
                let diag = a[[i, i]] - s;
                if !(diag > S::zero()) {
                    return Err(Error::Usage("covariance must be positive definite".into()));
                }
                l[[i, i]] = diag.sqrt();
            } else {
                l[[i, j]] = (a[[i, j]] - s) / l[[j, j]];
            }
        }
    }
    // Solve L Lᵀ X = I column by column.
    let mut inv = Array2::<S>::zeros((d, d));
    for c in 0..d {
        let mut y = vec![S::zero(); d];
        for i in 0..d {
            let rhs = if i == c { S::one() } else { S::zero() };
            let s: S = (0..i).map(|k| l[[i, k]] * y[k]).sum();
            y[i] = (rhs - s) / l[[i, i]];
        }
        for i in (0..d).rev() {
            let s: S = ((i + 1)..d).map(|k| l[[k, i]] * inv[[k, c]]).sum();
            inv[[i, c]] = (y[i] - s) / l[[i, i]];
        }
    }
    Ok(inv)
}

/// Euler–Maruyama on the path grid; row `k` is the state at `t_k`.
pub fn euler_maruyama<S: Scalar>(spec: &SdeSpec<S>, path: &DyadicPath<S>) -> Result<Array2<S>> {
    euler_maruyama_until(spec, path, path.steps())
}

fn euler_maruyama_until<S: Scalar>(spec: &SdeSpec<S>, path: &DyadicPath<S>, last: usize) -> Result<Array2<S>> {
    let d = spec.dim();
    if path.dim() != d {
        return usage(format!("SDE of dimension {d} driven by a {}-dimensional path", path.dim()));
    }
    let dt = path.dt();
    let mut traj = Array2::<S>::zeros((last + 1, d));
    let mut x = spec.x0().to_vec();
    traj.row_mut(0).assign(&Array1::from(x.clone()));
    let (mut mu, mut diff, mut dw) = (vec![S::zero(); d], vec![S::zero(); d], vec![S::zero(); d]);
    let mut scratch = vec![S::zero(); d * d];
    let w = path.values();
    for k in 0..last {
        let t = path.time(k);
        for c in 0..d {
            dw[c] = w[[c, k + 1]] - w[[c, k]];
        }
        spec.drift(t, &x, &mut mu);
        spec.diffusion_times(t, &x, &dw, &mut diff, &mut scratch);
        for c in 0..d {
            x[c] += mu[c] * dt + diff[c];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
        traj.row_mut(k + 1).assign(&Array1::from(x.clone()));
    }
    Ok(traj)
}

/// Pathwise exact (GBM) or exponential-integrator (OU) trajectory up to grid index `last`.
fn exact_until<S: Scalar>(spec: &SdeSpec<S>, path: &DyadicPath<S>, last: usize) -> Result<Array2<S>> {
    if path.dim() != 1 {
        return usage("closed-form solutions are scalar; path must be one-dimensional");
    }
    let w = path.component(0);
    let x0 = spec.x0()[0];
    let mut traj = Array2::<S>::zeros((last + 1, 1));
    match spec.kind() {
        SdeKind::GeometricBrownian { mu, sigma } => {
            let drift = *mu - *sigma * *sigma * S::lit(0.5);
            for k in 0..=last {
                traj[[k, 0]] = x0 * (drift * path.time(k) + *sigma * w[k]).exp();
            }
        }
        SdeKind::OrnsteinUhlenbeck { theta, mean, sigma } => {
            let dt = path.dt();
            let decay = (-*theta * dt).exp();
            let half = (-*theta * dt * S::lit(0.5)).exp();
            let mut x = x0;
            traj[[0, 0]] = x;
            for k in 0..last {
                x = *mean + (x - *mean) * decay + *sigma * half * (w[k + 1] - w[k]);
                traj[[k + 1, 0]] = x;
            }
        }
        _ => return usage("closed-form solution is only available for OU and GBM"),
    }
    Ok(traj)
}

/// State at dyadic time `t` from the closed form (GBM exact, OU exponential integrator).
pub fn exact_solution<S: Scalar>(spec: &SdeSpec<S>, path: &DyadicPath<S>, t: S) -> Result<Vec<S>> {
    let k = path.grid_index(t)?;
    let traj = exact_until(spec, path, k)?;
    Ok(traj.row(k).to_vec())
}

/// Whole-grid reference trajectory: closed form where available, Euler–Maruyama otherwise.
pub fn reference_trajectory<S: Scalar>(spec: &SdeSpec<S>, path: &DyadicPath<S>) -> Result<Array2<S>> {
    reference_until(spec, path, path.steps())
}

/// Reference state at grid index `k`.
pub fn reference_state<S: Scalar>(spec: &SdeSpec<S>, path: &DyadicPath<S>, k: usize) -> Result<Vec<S>> {
    if k > path.steps() {
        return usage(format!("grid index {k} beyond {}", path.steps()));
    }
    if let SdeKind::GeometricBrownian { mu, sigma } = spec.kind() {
        if path.dim() != 1 {
            return usage("GBM path must be one-dimensional");
        }
        let t = path.time(k);
        let x = spec.x0()[0] * ((*mu - *sigma * *sigma * S::lit(0.5)) * t + *sigma * path.component(0)[k]).exp();
        return Ok(vec![x]);
    }
    Ok(reference_until(spec, path, k)?.row(k).to_vec())
}

fn reference_until<S: Scalar>(spec: &SdeSpec<S>, path: &DyadicPath<S>, last: usize) -> Result<Array2<S>> {
    if spec.has_exact_solution() {
        exact_until(spec, path, last)
    } else {
        euler_maruyama_until(spec, path, last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_lab::sample_brownian;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr1, arr2};

    fn zero_path(level: u32) -> DyadicPath<f64> {
        DyadicPath::new(1.0, level, Array2::zeros((1, (1 << level) + 1))).unwrap()
    }

    #[test]
    fn gbm_zero_path_is_deterministic_growth() {
        let spec = SdeSpec::geometric_brownian(1.0, 0.3, 2.0, 1.0).unwrap();
        let path = zero_path(4);
        for k in [0usize, 3, 16] {
            let t = path.time(k);
            let x = exact_solution(&spec, &path, t).unwrap()[0];
            assert_abs_diff_eq!(x, 2.0 * ((1.0 - 0.045) * t).exp(), epsilon = 1e-14);
        }
    }

    #[test]
    fn ou_without_noise_follows_ode() {
        // σ = 0 is outside the spec family; drive with a zero path instead.
        let spec = SdeSpec::ornstein_uhlenbeck(1.0, 1.2, 1.3, 0.0, 1.0).unwrap();
        let path = zero_path(12);
        let x = exact_solution(&spec, &path, 1.0).unwrap()[0];
        assert_abs_diff_eq!(x, 1.2 + (0.0 - 1.2) * (-1.0f64).exp(), epsilon = 1e-6);
    }

    #[test]
    fn constant_custom_sde_stays_put() {
        let spec = SdeSpec::<f64>::custom(
            Arc::new(|_, _, out| out.fill(0.0)),
            Arc::new(|_, _, out| out.fill(0.0)),
            vec![0.7, -0.2],
            1.0,
        )
        .unwrap();
        let path = sample_brownian::<f64>(6, 1.0, 2, 4);
        let traj = euler_maruyama(&spec, &path).unwrap();
        assert!(traj.rows().into_iter().all(|r| r[0] == 0.7 && r[1] == -0.2));
    }

    #[test]
    fn euler_maruyama_reports_blow_up() {
        let spec = SdeSpec::<f64>::custom(
            Arc::new(|_, x, out| out[0] = 1e200 * x[0] * x[0]),
            Arc::new(|_, _, out| out.fill(0.0)),
            vec![1.0],
            1.0,
        )
        .unwrap();
        let path = sample_brownian::<f64>(4, 1.0, 1, 0);
        match euler_maruyama(&spec, &path) {
            Err(Error::NonFiniteState { step }) => assert!(step >= 1),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn validation() {
        assert!(SdeSpec::ornstein_uhlenbeck(0.0, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(SdeSpec::ornstein_uhlenbeck(1.0, 1.0, -1.0, 0.0, 1.0).is_err());
        assert!(SdeSpec::geometric_brownian(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(SdeSpec::geometric_brownian(1.0, 0.3, 1.0, 0.0).is_err());
        let not_pd = arr2(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(SdeSpec::gaussian_langevin(not_pd, arr1(&[0.0, 0.0]), vec![0.0, 0.0], 1.0).is_err());
        let asym = arr2(&[[1.0, 0.1], [0.0, 1.0]]);
        assert!(SdeSpec::gaussian_langevin(asym, arr1(&[0.0, 0.0]), vec![0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn langevin_drift_uses_inverse_covariance() {
        let cov = arr2(&[[2.0, 0.5], [0.5, 1.0]]);
        let spec = SdeSpec::gaussian_langevin(cov.clone(), arr1(&[1.0, -1.0]), vec![0.0, 0.0], 1.0).unwrap();
        let mut out = [0.0; 2];
        spec.drift(0.0, &[2.0, 0.5], &mut out);
        // Σ·(−drift) should give back x − μ
        let back = [
            -(cov[[0, 0]] * out[0] + cov[[0, 1]] * out[1]),
            -(cov[[1, 0]] * out[0] + cov[[1, 1]] * out[1]),
        ];
        assert_abs_diff_eq!(back[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back[1], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn reference_state_agrees_with_trajectory() {
        let spec = SdeSpec::ornstein_uhlenbeck(1.0, 1.2, 1.3, 0.5, 1.0).unwrap();
        let path = sample_brownian::<f64>(7, 1.0, 1, 3);
        let traj = reference_trajectory(&spec, &path).unwrap();
        for k in [0, 5, 128] {
            assert_eq!(reference_state(&spec, &path, k).unwrap()[0], traj[[k, 0]]);
        }
        let gbm = SdeSpec::geometric_brownian(1.0, 0.3, 1.0, 1.0).unwrap();
        let traj = reference_trajectory(&gbm, &path).unwrap();
        assert_eq!(reference_state(&gbm, &path, 77).unwrap()[0], traj[[77, 0]]);
    }

    #[test]
    fn exact_solution_rejects_langevin() {
        let spec = SdeSpec::gaussian_langevin(Array2::eye(1), arr1(&[0.0]), vec![0.0], 1.0).unwrap();
        let path = sample_brownian::<f64>(3, 1.0, 1, 0);
        assert!(exact_solution(&spec, &path, 0.5).is_err());
    }
}
