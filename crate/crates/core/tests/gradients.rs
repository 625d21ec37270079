//! Finite-difference verification of every analytic backward pass, over
//! seeded random instances of each layer kind and the full tiny model.

mod common;

use common::*;
use rand::Rng;

use sfcast_core::data::NormStats;
use sfcast_core::layers::{AffineScale, Conv1DLayer, DenseLayer, GlobalAvgPool, Layer, LstmLayer};
use sfcast_core::model::{build_model, LayerSpec, ModelSpec};
use sfcast_core::tensor::{Activation, Tensor};

pub const INSTANCES: usize = 20;

pub fn dense_suite(seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for instance in 0..INSTANCES {
        let in_dim = rng.random_range(1..=6);
        let out_dim = rng.random_range(1..=5);
        let batch = rng.random_range(1..=4);
        let activation = match instance % 3 {
            0 => Activation::Relu,
            1 => Activation::Linear,
            _ => Activation::Tanh,
        };
        let mut layer =
            Layer::Dense(DenseLayer::init(in_dim, out_dim, activation, &mut rng).unwrap());
        randomize_params(&mut layer, &mut rng);
        let x = random_tensor(&mut rng, &[batch, in_dim], 1.5);
        worst = worst.max(check_layer_gradients(&mut layer, &x));
    }
    worst
}

pub fn conv_suite(seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let k = rng.random_range(1..=3);
        let c_in = rng.random_range(1..=3);
        let filters = rng.random_range(1..=4);
        let t_len = rng.random_range(k..=k + 4);
        let batch = rng.random_range(1..=3);
        let mut layer = Layer::Conv1D(
            Conv1DLayer::init(k, c_in, filters, Activation::Relu, &mut rng).unwrap(),
        );
        randomize_params(&mut layer, &mut rng);
        let x = random_tensor(&mut rng, &[batch, t_len, c_in], 1.5);
        worst = worst.max(check_layer_gradients(&mut layer, &x));
    }
    worst
}

pub fn lstm_suite(seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for instance in 0..INSTANCES {
        let in_dim = rng.random_range(1..=4);
        let units = rng.random_range(1..=4);
        let t_len = rng.random_range(1..=5);
        let batch = rng.random_range(1..=3);
        let return_sequences = instance % 2 == 0;
        let mut layer =
            Layer::Lstm(LstmLayer::init(in_dim, units, return_sequences, &mut rng).unwrap());
        randomize_params(&mut layer, &mut rng);
        let x = random_tensor(&mut rng, &[batch, t_len, in_dim], 1.5);
        worst = worst.max(check_layer_gradients(&mut layer, &x));
    }
    worst
}

pub fn pool_suite(seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let t_len = rng.random_range(1..=6);
        let ch = rng.random_range(1..=4);
        let batch = rng.random_range(1..=3);
        let mut layer = Layer::Pool(GlobalAvgPool);
        let x = random_tensor(&mut rng, &[batch, t_len, ch], 2.0);
        worst = worst.max(check_layer_gradients(&mut layer, &x));
    }
    worst
}

pub fn scale_suite(seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let scale = rng.random_range(0.5..3.0);
        let offset = rng.random_range(-2.0..2.0);
        let batch = rng.random_range(1..=3);
        let width = rng.random_range(1..=4);
        let mut layer = Layer::Scale(AffineScale::new(scale, offset).unwrap());
        let x = random_tensor(&mut rng, &[batch, width], 2.0);
        worst = worst.max(check_layer_gradients(&mut layer, &x));
    }
    worst
}

/// The tiny end-to-end spec: window 8, conv kernel 3, LSTM units 4.
pub fn tiny_forecast_spec() -> ModelSpec {
    ModelSpec {
        input_window: 8,
        input_features: 1,
        layers: vec![
            LayerSpec::Conv1d {
                filters: 4,
                kernel_size: 3,
            },
            LayerSpec::Lstm {
                units: 4,
                return_sequences: true,
            },
            LayerSpec::Lstm {
                units: 4,
                return_sequences: false,
            },
            LayerSpec::Dense {
                units: 3,
                activation: Activation::Relu,
            },
            LayerSpec::Dense {
                units: 1,
                activation: Activation::Linear,
            },
            LayerSpec::Scale,
        ],
    }
}

pub fn full_model_suite(seed: u64, instances: usize) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let mut model = build_model(
            tiny_forecast_spec(),
            seed ^ (i as u64),
            NormStats {
                mean: 0.3,
                std: 1.7,
            },
        )
        .unwrap();
        let x = random_tensor(&mut rng, &[3, 8, 1], 1.5);
        worst = worst.max(check_model_gradients(&mut model, &x));
    }
    worst
}

#[test]
fn dense_gradients_match_finite_differences() {
    let worst = dense_suite(101);
    assert!(worst < GRAD_TOLERANCE, "max relative error {worst:e}");
}

#[test]
fn conv_gradients_match_finite_differences() {
    let worst = conv_suite(202);
    assert!(worst < GRAD_TOLERANCE, "max relative error {worst:e}");
}

#[test]
fn lstm_gradients_match_finite_differences() {
    let worst = lstm_suite(303);
    assert!(worst < GRAD_TOLERANCE, "max relative error {worst:e}");
}

#[test]
fn pool_gradients_match_finite_differences() {
    let worst = pool_suite(404);
    assert!(worst < GRAD_TOLERANCE, "max relative error {worst:e}");
}

#[test]
fn scale_gradients_match_finite_differences() {
    let worst = scale_suite(505);
    assert!(worst < GRAD_TOLERANCE, "max relative error {worst:e}");
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let worst = full_model_suite(606, 20);
    assert!(worst < GRAD_TOLERANCE, "max relative error {worst:e}");
}

#[test]
fn zero_upstream_gradient_is_all_zero() {
    let mut model = build_model(
        tiny_forecast_spec(),
        9,
        NormStats {
            mean: 0.0,
            std: 1.0,
        },
    )
    .unwrap();
    let x = Tensor::zeros(&[2, 8, 1]);
    let (_, caches) = model.forward_with_caches(&x).unwrap();
    let (grad_in, grads) = model
        .backward_with_caches(&caches, &Tensor::zeros(&[2, 1]))
        .unwrap();
    assert!(grad_in.data().iter().all(|&v| v == 0.0));
    for layer in grads {
        for tensor in layer {
            assert!(tensor.data().iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn identical_batch_rows_get_identical_row_gradients() {
    // duplicate row in a batch: the input gradients for both rows agree
    let mut model = build_model(
        tiny_forecast_spec(),
        4,
        NormStats {
            mean: 0.0,
            std: 1.0,
        },
    )
    .unwrap();
    let mut rng = seeded_rng(77);
    let row: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut data = row.clone();
    data.extend_from_slice(&row);
    let x = Tensor::new(vec![2, 8, 1], data).unwrap();
    let y = model.forward(&x).unwrap();
    assert!((y.data()[0] - y.data()[1]).abs() < 1e-15);
    let (grad_in, _) = {
        let (out_shape_grad, caches) = {
            let (out, caches) = model.forward_with_caches(&x).unwrap();
            (
                Tensor::new(out.shape().to_vec(), vec![0.5, 0.5]).unwrap(),
                caches,
            )
        };
        model
            .backward_with_caches(&caches, &out_shape_grad)
            .unwrap()
    };
    let (first, second) = grad_in.data().split_at(8);
    for (a, b) in first.iter().zip(second) {
        assert!((a - b).abs() < 1e-15);
    }
}
