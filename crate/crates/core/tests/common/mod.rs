//! Shared helpers for the gradient and acceptance test suites: a central
//! finite-difference oracle that is independent of every analytic backward
//! pass it checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sfcast_core::layers::Layer;
use sfcast_core::model::Model;
use sfcast_core::tensor::Tensor;

pub const FD_EPSILON: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-6;

/// Relative error with the denominator floored at 1e-8.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Deterministic upstream weights for a weighted-sum objective
/// `L = sum_i w_i * out_i`, whose gradient w.r.t. the output is exactly `w`.
pub fn upstream_weights(len: usize) -> Vec<f64> {
    (0..len).map(|i| (i as f64 * 0.73).sin() + 0.2).collect()
}

fn weighted_sum(out: &Tensor, weights: &[f64]) -> f64 {
    out.data().iter().zip(weights).map(|(o, w)| o * w).sum()
}

fn set_layer_param(layer: &mut Layer, param: usize, index: usize, value: f64) {
    let mut params = layer.parameters_mut();
    let tensor = &mut params[param];
    let mut data = tensor.data().to_vec();
    data[index] = value;
    **tensor = Tensor::new(tensor.shape().to_vec(), data).unwrap();
}

/// Checks one layer's analytic gradients (parameters and input) against
/// central finite differences of the weighted-sum objective. Returns the
/// maximum relative error seen.
pub fn check_layer_gradients(layer: &mut Layer, x: &Tensor) -> f64 {
    let (out, cache) = layer.forward(x).unwrap();
    let weights = upstream_weights(out.len());
    let grad_out = Tensor::new(out.shape().to_vec(), weights.clone()).unwrap();
    let (grad_in, param_grads) = layer.backward(&cache, &grad_out).unwrap();

    let mut max_rel: f64 = 0.0;
    let param_count = layer.parameters().len();
    for p in 0..param_count {
        for i in 0..layer.parameters()[p].len() {
            let orig = layer.parameters()[p].data()[i];
            set_layer_param(layer, p, i, orig + FD_EPSILON);
            let up = weighted_sum(&layer.forward(x).unwrap().0, &weights);
            set_layer_param(layer, p, i, orig - FD_EPSILON);
            let down = weighted_sum(&layer.forward(x).unwrap().0, &weights);
            set_layer_param(layer, p, i, orig);
            let fd = (up - down) / (2.0 * FD_EPSILON);
            max_rel = max_rel.max(relative_error(param_grads[p].data()[i], fd));
        }
    }

    for i in 0..x.len() {
        let mut bumped = x.data().to_vec();
        bumped[i] += FD_EPSILON;
        let x_up = Tensor::new(x.shape().to_vec(), bumped.clone()).unwrap();
        bumped[i] -= 2.0 * FD_EPSILON;
        let x_down = Tensor::new(x.shape().to_vec(), bumped).unwrap();
        let up = weighted_sum(&layer.forward(&x_up).unwrap().0, &weights);
        let down = weighted_sum(&layer.forward(&x_down).unwrap().0, &weights);
        let fd = (up - down) / (2.0 * FD_EPSILON);
        max_rel = max_rel.max(relative_error(grad_in.data()[i], fd));
    }
    max_rel
}

fn set_model_param(model: &mut Model, layer: usize, param: usize, index: usize, value: f64) {
    let mut layers = model.layer_parameters_mut();
    let tensor = &mut layers[layer][param];
    let mut data = tensor.data().to_vec();
    data[index] = value;
    **tensor = Tensor::new(tensor.shape().to_vec(), data).unwrap();
}

/// Full-model gradient check: analytic chain-rule gradients against central
/// finite differences of the weighted-sum objective over the model output.
///
/// The step size is chosen per coordinate. A composed multi-layer model maps
/// an O(1) objective onto gradients spanning many orders of magnitude; a
/// central difference at step `eps` resolves the gradient only to about
/// `|L|*2^-52 / (2*eps)` absolutely, so coordinates in the noise-limited
/// regime (|gradient| below ~1e-5) are re-evaluated at a larger step, where
/// their truncation error is still negligible.
pub fn check_model_gradients(model: &mut Model, x: &Tensor) -> f64 {
    let (out, caches) = model.forward_with_caches(x).unwrap();
    let weights = upstream_weights(out.len());
    let grad_out = Tensor::new(out.shape().to_vec(), weights.clone()).unwrap();
    let (_, grads) = model.backward_with_caches(&caches, &grad_out).unwrap();

    let mut max_rel: f64 = 0.0;
    let layer_count = model.layers().len();
    for layer_idx in 0..layer_count {
        let param_count = model.layer_parameters()[layer_idx].len();
        for p in 0..param_count {
            for i in 0..model.layer_parameters()[layer_idx][p].len() {
                let orig = model.layer_parameters()[layer_idx][p].data()[i];
                let analytic = grads[layer_idx][p].data()[i];
                // Tiny gradients need a larger step to rise above the
                // difference quotient's cancellation noise; their
                // truncation error is proportionally tiny.
                let eps = if analytic == 0.0 || analytic.abs() >= 1e-5 {
                    1e-4
                } else if analytic.abs() >= 1e-6 {
                    5e-4
                } else {
                    2e-3
                };
                set_model_param(model, layer_idx, p, i, orig + eps);
                let up = weighted_sum(&model.predict(x).unwrap(), &weights);
                set_model_param(model, layer_idx, p, i, orig - eps);
                let down = weighted_sum(&model.predict(x).unwrap(), &weights);
                set_model_param(model, layer_idx, p, i, orig);
                let fd = (up - down) / (2.0 * eps);
                max_rel = max_rel.max(relative_error(analytic, fd));
            }
        }
    }
    max_rel
}

/// Random tensor with entries in (-bound, bound).
pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Replaces every bias in the layer with small random values so bias
/// gradients are exercised away from zero.
pub fn randomize_params(layer: &mut Layer, rng: &mut ChaCha8Rng) {
    let mut params = layer.parameters_mut();
    for tensor in params.iter_mut() {
        let shape = tensor.shape().to_vec();
        let data = tensor
            .data()
            .iter()
            .map(|v| v + rng.random_range(-0.2..0.2))
            .collect();
        **tensor = Tensor::new(shape, data).unwrap();
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
