#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use sdeonet::neural::Mlp;
use sdeonet::sde_lab::{euler_maruyama, exact_solution, path_rng, sample_brownian_with, DyadicPath, SdeSpec};

/// Gauss–Hermite rule for the standard normal weight (Golub–Welsch):
/// nodes and weights summing to one.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Relative central-difference gradient error `max |g − fd| / max(1, |fd|)`.
pub fn fd_rel_error(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(1.0)
}

/// Central-difference check of parameter and input gradients.
pub fn gradient_error(net: &Mlp<f64>, x: &[f64], upstream: &[f64]) -> f64 {
    let h = 1e-6;
    let objective = |n: &Mlp<f64>, x: &[f64]| -> f64 {
        n.forward(x).unwrap().iter().zip(upstream).map(|(a, b)| a * b).sum()
    };
    let (grads, dx) = net.grad(x, upstream).unwrap();
    let mut worst = 0.0f64;
    let mut probe = net.clone();
    for l in 0..net.depth() {
        let (rows, cols) = net.layers()[l].weight.dim();
        for r in 0..rows {
            for c in 0..cols {
                let orig = probe.layers()[l].weight[[r, c]];
                probe.layers_mut()[l].weight[[r, c]] = orig + h;
                let up = objective(&probe, x);
                probe.layers_mut()[l].weight[[r, c]] = orig - h;
                let down = objective(&probe, x);
                probe.layers_mut()[l].weight[[r, c]] = orig;
                worst = worst.max(fd_rel_error(grads.layers[l].weight[[r, c]], (up - down) / (2.0 * h)));
            }
            let orig = probe.layers()[l].bias[r];
            probe.layers_mut()[l].bias[r] = orig + h;
            let up = objective(&probe, x);
            probe.layers_mut()[l].bias[r] = orig - h;
            let down = objective(&probe, x);
            probe.layers_mut()[l].bias[r] = orig;
            worst = worst.max(fd_rel_error(grads.layers[l].bias[r], (up - down) / (2.0 * h)));
        }
    }
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let up = objective(net, &xp);
        xp[i] = x[i] - h;
        let down = objective(net, &xp);
        xp[i] = x[i];
        worst = worst.max(fd_rel_error(dx[i], (up - down) / (2.0 * h)));
    }
    worst
}

/// Smallest `|pre-activation|` over the hidden layers at `x`.
pub fn kink_distance(net: &Mlp<f64>, x: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let mut closest = f64::INFINITY;
    for layer in &net.layers()[..net.depth() - 1] {
        let z: Vec<f64> = (0..layer.outputs())
            .map(|r| layer.bias[r] + layer.weight.row(r).iter().zip(&a).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        closest = z.iter().fold(closest, |c, v| c.min(v.abs()));
        a = z.into_iter().map(|v| v.max(0.0)).collect();
    }
    closest
}

/// Same Brownian path observed on the coarser level `level`.
pub fn coarsen(path: &DyadicPath<f64>, level: u32) -> DyadicPath<f64> {
    let stride = 1usize << (path.level() - level);
    let values = Array2::from_shape_fn((path.dim(), (1 << level) + 1), |(c, k)| path.values()[[c, k * stride]]);
    DyadicPath::new(path.horizon(), level, values).unwrap()
}

/// Log₂ RMS strong error at T of Euler–Maruyama against the exact GBM solution.
pub fn gbm_strong_errors(mu: f64, sigma: f64, levels: &[u32], n: u64, seed: u64) -> Vec<f64> {
    let spec = SdeSpec::geometric_brownian(mu, sigma, 1.0, 1.0).unwrap();
    let fine = *levels.iter().max().unwrap();
    let mut sq = vec![0.0; levels.len()];
    for i in 0..n {
        let path = sample_brownian_with::<f64, _>(&mut path_rng(seed, i), fine, 1.0, 1);
        let exact = exact_solution(&spec, &path, 1.0).unwrap()[0];
        for (s, &level) in sq.iter_mut().zip(levels) {
            let coarse = coarsen(&path, level);
            let em = euler_maruyama(&spec, &coarse).unwrap();
            *s += (em[[coarse.steps(), 0]] - exact).powi(2);
        }
    }
    sq.iter().map(|s| (s / n as f64).sqrt().log2()).collect()
}
