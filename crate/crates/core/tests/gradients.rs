//! Backprop against central finite differences, plus training-loop properties.

use proptest::prelude::*;
use purl_core::data::SyntheticSpec;
use purl_core::nn::{retrain, softmax, Matrix, Network, SgdConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

fn batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize, classes: usize) -> (Matrix, Vec<usize>) {
    let values = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let labels = (0..rows).map(|_| rng.gen_range(0..classes)).collect();
    (Matrix::new(rows, cols, values).unwrap(), labels)
}

/// Denominator floored at 1e-6: below that, central-difference noise (~1e-11) dominates.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Largest relative error over every weight and bias of a random 3-layer net.
fn max_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 3x4, 4x4 and 4x3 weight matrices: at most 16 weights per layer
    let net = Network::random(&[3, 4, 4, 3], &mut rng).unwrap();
    let mut net = net;
    for l in net.layers_mut() {
        for b in l.bias_mut() {
            *b = rng.gen_range(-0.5..0.5);
        }
    }
    let (x, y) = batch(&mut rng, 8, 3, 3);
    let (_, grads) = net.loss_and_grads(&x, &y).unwrap();
    let mut worst = 0.0f64;
    for li in 0..net.num_layers() {
        for flat in 0..net.layer(li).weights().len() {
            let w = net.layer(li).weights().as_slice()[flat];
            let mut plus = net.clone();
            plus.layer_mut(li).set_weight(flat, w + H);
            let mut minus = net.clone();
            minus.layer_mut(li).set_weight(flat, w - H);
            let numeric = (plus.loss(&x, &y).unwrap() - minus.loss(&x, &y).unwrap()) / (2.0 * H);
            worst = worst.max(rel_err(grads.layers[li].weights.as_slice()[flat], numeric));
        }
        for j in 0..net.layer(li).bias().len() {
            let b = net.layer(li).bias()[j];
            let mut plus = net.clone();
            plus.layer_mut(li).bias_mut()[j] = b + H;
            let mut minus = net.clone();
            minus.layer_mut(li).bias_mut()[j] = b - H;
            let numeric = (plus.loss(&x, &y).unwrap() - minus.loss(&x, &y).unwrap()) / (2.0 * H);
            worst = worst.max(rel_err(grads.layers[li].bias[j], numeric));
        }
    }
    worst
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in 0..3 {
        let err = max_gradient_error(seed);
        assert!(err < 1e-4, "seed {seed}: max relative error {err}");
    }
}

#[test]
fn small_sgd_step_descends() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut net = Network::random(&[5, 8, 8, 3], &mut rng).unwrap();
        let (x, y) = batch(&mut rng, 32, 5, 3);
        let (before, grads) = net.loss_and_grads(&x, &y).unwrap();
        net.sgd_step(&grads, 1e-3);
        let after = net.loss(&x, &y).unwrap();
        assert!(after < before, "seed {seed}: {after} >= {before}");
    }
}

#[test]
fn training_is_deterministic() {
    let (train, _) = SyntheticSpec {
        train_examples: 300,
        test_examples: 10,
        features: 6,
        ..Default::default()
    }
    .generate()
    .unwrap();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = Network::random(&[6, 10, 3], &mut rng).unwrap();
        retrain(&mut net, &train, 2, &SgdConfig::default(), &mut rng).unwrap();
        net
    };
    let (a, b) = (run(), run());
    assert_eq!(a.checksum(), b.checksum());
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(values in prop::collection::vec(-50.0f64..50.0, 1..40), cols in 1usize..8) {
        let rows = values.len() / cols;
        prop_assume!(rows > 0);
        let m = Matrix::new(rows, cols, values[..rows * cols].to_vec()).unwrap();
        let p = softmax(&m);
        for r in 0..rows {
            let s: f64 = p.row(r).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12, "row {} sums to {}", r, s);
            prop_assert!(p.row(r).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn masked_weights_stay_zero_through_training(seed in 0u64..1000, keep in 0.1f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Network::random(&[4, 6, 3], &mut rng).unwrap();
        for l in 0..net.num_layers() {
            for flat in 0..net.layer(l).weights().len() {
                if rng.gen::<f64>() > keep {
                    net.layer_mut(l).prune(flat);
                }
            }
        }
        let masks: Vec<Vec<bool>> = net.layers().iter().map(|l| l.mask().to_vec()).collect();
        let (x, y) = batch(&mut rng, 40, 4, 3);
        let data = purl_core::data::Dataset::new(x, y, 3, purl_core::data::Split::Train).unwrap();
        retrain(&mut net, &data, 2, &SgdConfig { lr: 0.1, batch_size: 8 }, &mut rng).unwrap();
        prop_assert!(net.masks_respected());
        for (l, m) in net.layers().iter().zip(&masks) {
            prop_assert_eq!(l.mask(), m.as_slice());
            for (w, &keep) in l.weights().as_slice().iter().zip(m) {
                if !keep {
                    prop_assert_eq!(w.to_bits(), 0.0f64.to_bits());
                }
            }
        }
    }
}
