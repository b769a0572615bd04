mod common;

use proptest::prelude::*;
use sdeonet::chaos_basis::*;
use sdeonet::sde_lab::{path_rng, sample_brownian, sample_brownian_with};

#[test]
fn hermite_orthonormal_under_gauss_hermite() {
    let (nodes, weights) = common::gauss_hermite(64);
    for a in 0..=10 {
        for b in 0..=10 {
            let ip: f64 = nodes.iter().zip(&weights).map(|(&x, w)| w * hermite_eval(a, x) * hermite_eval(b, x)).sum();
            let expected = if a == b { 1.0 } else { 0.0 };
            assert!((ip - expected).abs() < 1e-8, "H{a}·H{b} = {ip}");
        }
    }
}

#[test]
fn haar_orthonormal_on_other_horizons() {
    for horizon in [0.5, 2.0] {
        for i in 0..32 {
            for j in 0..32 {
                let ip = haar_inner_product(HaarIndex::new(i), HaarIndex::new(j), horizon).unwrap();
                assert!((ip - f64::from(u8::from(i == j))).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn tail_energy_below_geometric_bound() {
    for horizon in [0.5f64, 1.0, 2.0] {
        for level in 1..=8 {
            for k in 0..=32 {
                let t = horizon * k as f64 / 32.0;
                let tail = haar_tail_energy(level, t, horizon, 40).unwrap();
                assert!(tail <= 2.0 * horizon * (1.0 + t) * 2f64.powi(-(level as i32)));
            }
        }
    }
}

#[test]
fn dyadic_reconstruction_is_exact() {
    for seed in 0..5 {
        let path = sample_brownian::<f64>(10, 1.0, 1, seed);
        for m in [2usize, 8, 64] {
            let g = encode_path(&path, m).unwrap();
            for k in 0..=m {
                let t = k as f64 / m as f64;
                let w = path.component(0)[k * (1024 / m)];
                assert!((reconstruct_path(g.as_slice(), t, 1.0).unwrap() - w).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn features_are_standard_normal() {
    let (n, m) = (100_000u64, 8);
    let mut sums = vec![0.0; m];
    let mut cross = vec![vec![0.0; m]; m];
    for i in 0..n {
        let path = sample_brownian_with::<f64, _>(&mut path_rng(11, i), 6, 1.0, 1);
        let g = encode_path(&path, m).unwrap();
        let g = g.as_slice();
        for a in 0..m {
            sums[a] += g[a];
            for b in 0..m {
                cross[a][b] += g[a] * g[b];
            }
        }
    }
    let n = n as f64;
    let se = 1.0 / n.sqrt();
    for a in 0..m {
        assert!((sums[a] / n).abs() <= 3.0 * se, "mean of G{a}");
        assert!((cross[a][a] / n - 1.0).abs() <= 3.0 * 2f64.sqrt() * se, "variance of G{a}");
        for b in a + 1..m {
            assert!((cross[a][b] / n).abs() <= 3.0 * se, "correlation of G{a}, G{b}");
        }
    }
}

proptest! {
    #[test]
    fn haar_index_round_trip(i in 1usize..1 << 20) {
        let (n, j) = HaarIndex::new(i).level_position().unwrap();
        prop_assert_eq!(HaarIndex::from_level_position(n, j).unwrap().get(), i);
    }

    #[test]
    fn antiderivative_is_bounded_hat(i in 1usize..512, t in 0.0f64..=1.0) {
        let (n, _) = HaarIndex::new(i).level_position().unwrap();
        let e = haar_antiderivative(HaarIndex::new(i), t, 1.0).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!(e * e <= 2f64.powi(-(n as i32 + 1)) + 1e-15);
    }

    #[test]
    fn index_set_sizes(p in 0u32..5, k in 1usize..6) {
        let set = enumerate_multi_indices(p, k);
        prop_assert_eq!(set.len() as u128, binomial(u64::from(p) + k as u64, k as u64));
        prop_assert!(set.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(set.iter().all(|a| a.degree() <= p && a.len() == k));
    }

    #[test]
    fn multi_index_text_round_trip(entries in proptest::collection::vec(0u32..9, 1..10)) {
        let alpha = MultiIndex::new(entries);
        prop_assert_eq!(alpha.to_string().parse::<MultiIndex>().unwrap(), alpha);
    }

    #[test]
    fn chaos_polynomial_factorises(a in 0u32..5, b in 0u32..5, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let alpha = MultiIndex::new(vec![a, b]);
        let v = chaos_poly_eval(&alpha, &[x, y]).unwrap();
        prop_assert!((v - hermite_eval(a as usize, x) * hermite_eval(b as usize, y)).abs() < 1e-10 * (1.0 + v.abs()));
    }
}
