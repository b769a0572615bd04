mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdeonet::neural::*;

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..50 {
        let depth = rng.random_range(1..4);
        let dims: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..6)).collect();
        let mut net = Mlp::<f64>::init(&dims, case, InitScheme::FanInUniform).unwrap();
        for layer in net.layers_mut() {
            layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let x = loop {
            let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
            if common::kink_distance(&net, &x) > 1e-3 {
                break x;
            }
        };
        let u: Vec<f64> = (0..dims[depth]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = common::gradient_error(&net, &x, &u);
        assert!(err <= 1e-5, "case {case} dims {dims:?}: {err}");
    }
}

#[test]
fn hand_evaluated_two_two_one() {
    let net = Mlp::from_layers(vec![
        Layer { weight: ndarray::arr2(&[[2.0, 0.0], [-1.0, 1.0]]), bias: ndarray::arr1(&[-1.0, 0.0]) },
        Layer { weight: ndarray::arr2(&[[1.0, 3.0]]), bias: ndarray::arr1(&[0.5]) },
    ])
    .unwrap();
    // hidden = relu(2·1 − 1, −1 + 3) = (1, 2); output = 1 + 6 + 0.5
    assert_eq!(net.forward(&[1.0, 3.0]).unwrap(), vec![7.5]);
    // hidden = relu(−5, 4) = (0, 4); output = 12.5
    assert_eq!(net.forward(&[-2.0, 2.0]).unwrap(), vec![12.5]);
}

#[test]
fn batched_forward_matches_rows() {
    let net = Mlp::<f32>::init(&[4, 16, 16, 3], 1, InitScheme::FanInUniform).unwrap();
    let x = Array2::from_shape_fn((5, 4), |(i, j)| (i as f32 - 2.0) * 0.3 + j as f32 * 0.1);
    let batch = net.forward_batch(x.view()).unwrap();
    for i in 0..5 {
        let row = net.forward(x.row(i).as_slice().unwrap()).unwrap();
        for (a, b) in row.iter().zip(batch.row(i)) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn checkpoint_round_trip_preserves_outputs() {
    let net = Mlp::<f64>::init(&[3, 9, 2], 8, InitScheme::FanInUniform).unwrap();
    let mut buf = Vec::new();
    write_mlp(&net, &mut buf).unwrap();
    let back: Mlp<f64> = read_mlp(&mut buf.as_slice()).unwrap();
    assert_eq!(back.forward(&[0.1, 0.2, 0.3]).unwrap(), net.forward(&[0.1, 0.2, 0.3]).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn padding_is_exact_for_any_input(
        dims in proptest::collection::vec(1usize..6, 2..4),
        extra in 0usize..3,
        seed in 0u64..1000,
        x in proptest::collection::vec(-10.0f64..10.0, 5),
    ) {
        let net = Mlp::<f64>::init(&dims, seed, InitScheme::FanInUniform).unwrap();
        let padded = pad_to_depth(&net, net.depth() + extra).unwrap();
        let x = &x[..dims[0].min(5)];
        prop_assume!(x.len() == dims[0]);
        prop_assert_eq!(padded.forward(x).unwrap(), net.forward(x).unwrap());
    }

    #[test]
    fn parallelisation_identities(seed in 0u64..1000, w1 in 1usize..6, w2 in 1usize..6, o1 in 1usize..4, o2 in 1usize..4) {
        let a = Mlp::<f64>::init(&[3, w1, o1], seed, InitScheme::FanInUniform).unwrap();
        let b = Mlp::<f64>::init(&[3, w2, w2, o2], seed + 1, InitScheme::FanInUniform).unwrap();
        let b_depth = b.depth();
        let a = pad_to_depth(&a, b_depth).unwrap();
        let p = parallelise(&a, &b).unwrap();
        prop_assert_eq!(p.nonzero_count(), a.nonzero_count() + b.nonzero_count());
        prop_assert_eq!(p.depth(), b_depth);
        let x = [0.3, -1.2, 0.8];
        let mut expected = a.forward(&x).unwrap();
        expected.extend(b.forward(&x).unwrap());
        for (g, e) in p.forward(&x).unwrap().iter().zip(&expected) {
            prop_assert!((g - e).abs() < 1e-12);
        }
    }
}
