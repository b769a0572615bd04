use ndarray::Array2;
use rayon::prelude::*;

use super::SampleCloud;
use crate::error::{usage, Result};
use crate::scalar::Scalar;

/// Sinkhorn solver settings. `epsilon = None` selects
/// `0.05 · median pairwise cost` of the pooled clouds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornParams {
    pub epsilon: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
    /// Anneal the regularisation from the cost diameter down to `epsilon`.
    pub eps_scaling: bool,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        SinkhornParams { epsilon: None, max_iters: 2000, tol: 1e-4, eps_scaling: true }
    }
}

/// Debiased divergence with solver diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornOutcome {
    pub divergence: f64,
    pub epsilon: f64,
    /// Largest iteration count among the three transport problems.
    pub iterations: usize,
    pub converged: bool,
}

/// Median of `‖x − y‖²` over all distinct pairs of the pooled clouds.
pub fn median_pairwise_cost<S: Scalar>(a: &SampleCloud<S>, b: &SampleCloud<S>) -> Result<f64> {
    if a.dim() != b.dim() {
        return usage(format!("cloud dimensions differ: {} vs {}", a.dim(), b.dim()));
    }
    let pooled: Vec<Vec<f64>> = (0..a.len())
        .map(|i| a.point(i).iter().map(|v| v.into_f64()).collect())
        .chain((0..b.len()).map(|i| b.point(i).iter().map(|v| v.into_f64()).collect()))
        .collect();
    let mut costs: Vec<f64> = (0..pooled.len())
        .flat_map(|i| (i + 1..pooled.len()).map(move |j| (i, j)))
        .map(|(i, j)| sq_dist(&pooled[i], &pooled[j]))
        .collect();
    if costs.is_empty() {
        return Ok(0.0);
    }
    let mid = costs.len() / 2;
    let (_, median, _) = costs.select_nth_unstable_by(mid, |x, y| x.total_cmp(y));
    Ok(*median)
}

/// `S_ε(a,b) = OT_ε(a,b) − ½OT_ε(a,a) − ½OT_ε(b,b)` with squared Euclidean
/// cost, clamped at zero. Non-convergence is reported, not raised.
pub fn sinkhorn_divergence<S: Scalar>(
    a: &SampleCloud<S>,
    b: &SampleCloud<S>,
    params: &SinkhornParams,
) -> Result<SinkhornOutcome> {
    if a.dim() != b.dim() {
        return usage(format!("cloud dimensions differ: {} vs {}", a.dim(), b.dim()));
    }
    let epsilon = match params.epsilon {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return usage(format!("sinkhorn epsilon must be positive, got {e}")),
        None => {
            let median = median_pairwise_cost(a, b)?;
            if median > 0.0 {
                0.05 * median
            } else {
                1.0
            }
        }
    };
    if params.max_iters == 0 || params.tol <= 0.0 {
        return usage("sinkhorn needs max_iters ≥ 1 and tol > 0");
    }
    let pa = to_f64(a);
    let pb = to_f64(b);
    let ab = entropic_ot(&pa, &pb, epsilon, params);
    let aa = entropic_ot(&pa, &pa, epsilon, params);
    let bb = entropic_ot(&pb, &pb, epsilon, params);
    let divergence = ab.value - 0.5 * aa.value - 0.5 * bb.value;
    Ok(SinkhornOutcome {
        divergence: divergence.max(0.0),
        epsilon,
        iterations: ab.iterations.max(aa.iterations).max(bb.iterations),
        converged: ab.converged && aa.converged && bb.converged,
    })
}

struct OtSolve {
    value: f64,
    iterations: usize,
    converged: bool,
}

fn to_f64<S: Scalar>(c: &SampleCloud<S>) -> Array2<f64> {
    c.points().mapv(|v| v.into_f64())
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Entropic transport between uniform measures by symmetric log-domain
/// dual ascent: `f ← ½(f + T_b(g))`, `g ← ½(g + T_a(f))`. Swapping the
/// clouds swaps `f` and `g` without changing any floating-point operation.
fn entropic_ot(x: &Array2<f64>, y: &Array2<f64>, epsilon: f64, params: &SinkhornParams) -> OtSolve {
    let (n, m) = (x.nrows(), y.nrows());
    let cost = Array2::from_shape_fn((n, m), |(i, j)| {
        x.row(i).iter().zip(y.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    });
    let cost_t = cost.t().as_standard_layout().into_owned();
    let (log_a, log_b) = (-(n as f64).ln(), -(m as f64).ln());
    let diameter = cost.iter().copied().fold(0.0f64, f64::max);

    let mut schedule = Vec::new();
    if params.eps_scaling && diameter > epsilon {
        let mut e = diameter;
        while e > epsilon {
            schedule.push(e);
            e *= 0.5;
        }
    }

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut iterations = 0;
    for &e in &schedule {
        if iterations >= params.max_iters {
            break;
        }
        let tf = softmin(&cost, &g, log_b, e);
        let tg = softmin(&cost_t, &f, log_a, e);
        average_into(&mut f, &tf);
        average_into(&mut g, &tg);
        iterations += 1;
    }
    let mut converged = false;
    while iterations < params.max_iters {
        let tf = softmin(&cost, &g, log_b, epsilon);
        let tg = softmin(&cost_t, &f, log_a, epsilon);
        let violation_a: f64 = f.iter().zip(&tf).map(|(fi, ti)| ((fi - ti) / epsilon).exp_m1().abs()).sum::<f64>() / n as f64;
        let violation_b: f64 = g.iter().zip(&tg).map(|(gj, tj)| ((gj - tj) / epsilon).exp_m1().abs()).sum::<f64>() / m as f64;
        if violation_a.max(violation_b) < params.tol {
            converged = true;
            break;
        }
        average_into(&mut f, &tf);
        average_into(&mut g, &tg);
        iterations += 1;
    }
    let value = f.iter().sum::<f64>() / n as f64 + g.iter().sum::<f64>() / m as f64;
    OtSolve { value, iterations, converged }
}

fn average_into(target: &mut [f64], update: &[f64]) {
    for (t, u) in target.iter_mut().zip(update) {
        *t = 0.5 * (*t + u);
    }
}

/// `T(h)_i = −ε log Σ_j w_j exp((h_j − C_ij)/ε)` with uniform `log w_j = log_w`.
fn softmin(cost: &Array2<f64>, h: &[f64], log_w: f64, epsilon: f64) -> Vec<f64> {
    let rows: Vec<usize> = (0..cost.nrows()).collect();
    rows.par_iter()
        .map(|&i| {
            let row = cost.row(i);
            let row = row.as_slice().expect("standard layout");
            let mut max = f64::NEG_INFINITY;
            for (c, hj) in row.iter().zip(h) {
                max = max.max((hj - c) / epsilon);
            }
            let sum: f64 = row.iter().zip(h).map(|(c, hj)| ((hj - c) / epsilon - max).exp()).sum();
            -epsilon * (max + sum.ln() + log_w)
        })
        .collect()
}
