mod common;

use common::{finite_difference_grad, mlp_gradient_error, random_batch, random_circuit, random_dataset};
use ndarray::Array2;
use qarch::nn::{Mlp, Mode};
use qarch::optim::AdamConfig;
use qarch::rng::seeded;
use qarch::vqc::{param_shift_grad, EmbeddedSet};
use rand::RngExt;

#[test]
fn parameter_shift_matches_finite_differences() {
    let mut rng = seeded(21);
    for _ in 0..50 {
        let n = rng.random_range(1..=4);
        let gates = rng.random_range(1..=8);
        let mut circuit = random_circuit(&mut rng, n, gates);
        if circuit.n_params() == 0 {
            circuit.push_rotation(qarch::qsim::Axis::Y, 0, 0.4).unwrap();
        }
        let data = random_dataset(&mut rng, n, 6);
        let shift = param_shift_grad(&circuit, &data).unwrap();
        let fd = finite_difference_grad(&circuit, &data, 1e-5);
        for (s, f) in shift.iter().zip(&fd) {
            assert!((s - f).abs() <= 1e-5, "shift {s} vs fd {f}");
        }
        let (_, batched) = EmbeddedSet::new(&data).unwrap().loss_and_gradient(&circuit).unwrap();
        for (s, b) in shift.iter().zip(&batched) {
            assert!((s - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn mlp_backprop_matches_finite_differences() {
    for seed in 0..3 {
        assert!(mlp_gradient_error(seed) <= 1e-4);
    }
}

#[test]
fn zero_residual_leaves_parameters() {
    let mut rng = seeded(8);
    let mut net = Mlp::new(&[3, 4, 2], 0.01, 0.0, &mut rng).unwrap();
    let x = Array2::from_shape_vec((1, 3), vec![0.2, -0.4, 1.0]).unwrap();
    let target = net.predict_batch(&x).unwrap()[[0, 1]];
    let before = net.layers().to_vec();
    let mut adam = net.adam(AdamConfig::with_lr(1e-2));
    let loss = net.train_step(&mut adam, &x, &[1], &[target], &mut rng).unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(net.layers(), &before[..]);
}

#[test]
fn overfits_one_sample() {
    let mut rng = seeded(9);
    let mut net = Mlp::new(&[6, 16, 16, 3], 0.01, 0.0, &mut rng).unwrap();
    let x = random_batch(1, 6, 10);
    let mut adam = net.adam(AdamConfig::with_lr(1e-2));
    let mut losses = Vec::new();
    for _ in 0..500 {
        losses.push(net.train_step(&mut adam, &x, &[2], &[2.5], &mut rng).unwrap());
    }
    assert!(losses[0] > 0.1);
    assert!(*losses.last().unwrap() < 1e-6);
    // Trend check over blocks of 50 steps.
    let blocks: Vec<f64> = losses.chunks(50).map(|c| c.iter().sum::<f64>()).collect();
    assert!(blocks.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn fixed_batch_loss_trends_down() {
    let mut rng = seeded(12);
    let mut net = Mlp::new(&[9, 32, 32, 5], 0.01, 0.0, &mut rng).unwrap();
    let x = random_batch(16, 9, 13);
    let actions: Vec<usize> = (0..16).map(|i| i % 5).collect();
    let targets: Vec<f64> = (0..16).map(|i| (i as f64 - 8.0) / 4.0).collect();
    let mut adam = net.adam(AdamConfig::with_lr(1e-3));
    let losses: Vec<f64> =
        (0..100).map(|_| net.train_step(&mut adam, &x, &actions, &targets, &mut rng).unwrap()).collect();
    let blocks: Vec<f64> = losses.chunks(10).map(|c| c.iter().sum::<f64>()).collect();
    assert!(blocks.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn inverted_dropout_preserves_mean() {
    let mut rng = seeded(14);
    let net = Mlp::new(&[4, 64, 3], 0.01, 0.1, &mut rng).unwrap();
    let x = [0.5, -1.0, 1.5, 0.25];
    let deterministic = net.predict(&x).unwrap();
    let draws = 100_000;
    let mut mean = [0.0; 3];
    for _ in 0..draws {
        for (m, v) in mean.iter_mut().zip(net.forward(&x, &mut rng).unwrap()) {
            *m += v / draws as f64;
        }
    }
    let diff: f64 = mean.iter().zip(&deterministic).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = deterministic.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(diff <= 0.02 * norm, "diff {diff} norm {norm}");
}

#[test]
fn inference_is_bit_deterministic() {
    let mut rng = seeded(15);
    let mut net = Mlp::new(&[4, 8, 2], 0.01, 0.5, &mut rng).unwrap();
    net.set_mode(Mode::Inference);
    let x = [0.1, 0.2, 0.3, 0.4];
    let a = net.forward(&x, &mut rng).unwrap();
    let b = net.forward(&x, &mut rng).unwrap();
    assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}
