mod common;

use ndarray::Array2;
use sdeonet::sde_lab::*;

#[test]
fn euler_maruyama_strong_order_on_gbm() {
    let levels: Vec<u32> = (6..=12).collect();
    let errors = common::gbm_strong_errors(1.0, 0.3, &levels, 2000, 5);
    let log_dt: Vec<f64> = levels.iter().map(|&l| -(l as f64)).collect();
    let slope = common::slope(&log_dt, &errors);
    assert!((0.35..=0.65).contains(&slope), "slope {slope}, errors {errors:?}");
}

#[test]
fn increments_have_the_grid_variance() {
    let (level, n) = (4u32, 100_000 / 16);
    let mut values = Vec::new();
    for i in 0..n {
        let path = sample_brownian_with::<f64, _>(&mut path_rng(1, i), level, 2.0, 1);
        values.extend(path.component(0).windows(2).into_iter().map(|w| w[1] - w[0]));
    }
    let nf = values.len() as f64;
    let var = values.iter().map(|v| v * v).sum::<f64>() / nf;
    let target = 2.0 / 16.0;
    assert!((var - target).abs() <= 3.0 * target * (2.0 / nf).sqrt(), "{var}");
}

#[test]
fn gbm_mean_at_horizon() {
    let spec = SdeSpec::geometric_brownian(1.0, 0.3, 1.0, 1.0).unwrap();
    let n = 100_000;
    let xs: Vec<f64> = (0..n)
        .map(|i| {
            let path = sample_brownian_with::<f64, _>(&mut path_rng(2, i), 1, 1.0, 1);
            exact_solution(&spec, &path, 1.0).unwrap()[0]
        })
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    assert!((mean - 1f64.exp()).abs() <= 3.0 * sd / (n as f64).sqrt());
}

#[test]
fn ou_deterministic_limit() {
    assert!(SdeSpec::ornstein_uhlenbeck(1.0, 1.2, 0.0, 0.3, 1.0).is_err());
    // the zero Brownian path removes the noise term
    let spec = SdeSpec::ornstein_uhlenbeck(1.0, 1.2, 1.3, 0.3, 1.0).unwrap();
    let zero = DyadicPath::new(1.0, 12, Array2::zeros((1, 4097))).unwrap();
    for k in [0usize, 1024, 4096] {
        let t = k as f64 / 4096.0;
        let x = exact_solution(&spec, &zero, t).unwrap()[0];
        assert!((x - (1.2 + (0.3 - 1.2) * (-t).exp())).abs() < 1e-6);
    }
}

#[test]
fn ou_stationary_statistics() {
    let (theta, mean, sigma) = (1.0, 1.2, 1.3);
    let spec = SdeSpec::ornstein_uhlenbeck(theta, mean, sigma, 1.0, 6.0).unwrap();
    let n = 20_000;
    let xs: Vec<f64> = (0..n)
        .map(|i| {
            let path = sample_brownian_with::<f64, _>(&mut path_rng(3, i), 9, 6.0, 1);
            exact_solution(&spec, &path, 6.0).unwrap()[0]
        })
        .collect();
    let m = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    assert!((m - mean).abs() <= 3.0 * (var / n as f64).sqrt(), "mean {m}");
    let target = sigma * sigma / (2.0 * theta);
    assert!((var - target).abs() <= 0.05 * target, "variance {var}");
}

#[test]
fn ou_euler_gap_halves_per_level() {
    let spec = SdeSpec::ornstein_uhlenbeck(1.0, 1.2, 1.3, 1.0, 1.0).unwrap();
    let path = sample_brownian::<f64>(12, 1.0, 1, 9);
    let gaps: Vec<f64> = (6..=10)
        .map(|level| {
            let coarse = common::coarsen(&path, level);
            let em = euler_maruyama(&spec, &coarse).unwrap();
            let ei = reference_trajectory(&spec, &coarse).unwrap();
            em.iter().zip(ei.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((1.5..=2.7).contains(&mean_ratio), "gaps {gaps:?}");
}

#[test]
fn dataset_samples_re_encode() {
    let spec = SdeSpec::ornstein_uhlenbeck(1.0, 1.2, 1.3, 1.0, 1.0).unwrap();
    let data = make_dataset(&spec, 20, 16, 8, 4).unwrap();
    for s in &data {
        let (k, path) = sample_path(&spec, 8, 4, s.path_id);
        assert_eq!(sdeonet::chaos_basis::encode_path(&path, 16).unwrap().into_vec(), s.g);
        assert_eq!(reference_state(&spec, &path, k).unwrap(), s.x);
    }
}
