//! Training: MAE loss with subgradient, Adam with bias correction, the
//! mini-batch loop with per-epoch curve emission, and full-dataset
//! evaluation.
//!
//! Parallelism happens over fixed-size row chunks within a batch; partial
//! gradients are reduced sequentially in chunk order, so results are
//! bit-identical regardless of thread count.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::metrics::{self, EvalReport};
use crate::model::{Model, ModelGrads};
use crate::tensor::Tensor;

/// Rows per gradient chunk. Fixed (not derived from the thread count) so
/// the floating-point reduction order never changes.
const GRAD_CHUNK: usize = 8;
/// Rows per inference chunk during evaluation.
const EVAL_CHUNK: usize = 256;

/// Hyperparameters for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Stop when validation MAE has not improved for this many epochs.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            shuffle: true,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, dataset_size: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".to_string()));
        }
        if self.batch_size == 0 || self.batch_size > dataset_size {
            return Err(Error::InvalidConfig(format!(
                "batch_size must lie in [1, {dataset_size}], got {}",
                self.batch_size
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// One per-epoch history entry. `wall_time` is informational and excluded
/// from determinism guarantees; everything else is fully determined by
/// (seed, data, config).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub optimizer_steps: u64,
}

/// Mean absolute error and its subgradient w.r.t. the predictions:
/// `grad[i] = sign(pred[i] - target[i]) / B`, with `sign(0) = 0`.
pub fn mae_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            context: "mae_loss".to_string(),
            expected: format!("{:?}", target.shape()),
            got: format!("{:?}", pred.shape()),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput {
            context: "mae_loss".to_string(),
        });
    }
    let n = pred.len() as f64;
    let mut grad = vec![0.0; pred.len()];
    let mut sum = 0.0;
    for (g, (&p, &t)) in grad.iter_mut().zip(pred.data().iter().zip(target.data())) {
        let diff = p - t;
        sum += diff.abs();
        *g = if diff > 0.0 {
            1.0 / n
        } else if diff < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    }
    Ok((sum / n, Tensor::from_parts(pred.shape().to_vec(), grad)))
}

/// Adam optimizer state: first/second moment estimates mirroring the
/// model's parameter layout, plus the step counter for bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Vec<Tensor>>,
    v: Vec<Vec<Tensor>>,
    step: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    pub fn new(model: &Model, config: &TrainConfig) -> Self {
        let zeros: Vec<Vec<Tensor>> = model
            .layer_parameters()
            .iter()
            .map(|params| params.iter().map(|p| Tensor::zeros(p.shape())).collect())
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update over every parameter tensor.
    pub fn step(&mut self, model: &mut Model, grads: &ModelGrads) -> Result<()> {
        let mut params = model.layer_parameters_mut();
        check_layout(&params, grads)?;
        self.step += 1;
        let t = self.step;
        let bc1 = 1.0 - self.beta1.powi(t as i32);
        let bc2 = 1.0 - self.beta2.powi(t as i32);
        for (layer_idx, layer_params) in params.iter_mut().enumerate() {
            for (param_idx, param) in layer_params.iter_mut().enumerate() {
                adam_update(
                    param.data_mut(),
                    grads[layer_idx][param_idx].data(),
                    self.m[layer_idx][param_idx].data_mut(),
                    self.v[layer_idx][param_idx].data_mut(),
                    self.learning_rate,
                    self.beta1,
                    self.beta2,
                    self.epsilon,
                    bc1,
                    bc2,
                );
            }
        }
        Ok(())
    }
}

fn check_layout(params: &[Vec<&mut Tensor>], grads: &ModelGrads) -> Result<()> {
    let describe = |shapes: Vec<Vec<&[usize]>>| format!("{shapes:?}");
    if params.len() != grads.len()
        || params
            .iter()
            .zip(grads)
            .any(|(p, g)| p.len() != g.len() || p.iter().zip(g).any(|(a, b)| a.shape() != b.shape()))
    {
        return Err(Error::LayoutMismatch {
            context: "adam step".to_string(),
            expected: describe(
                params
                    .iter()
                    .map(|l| l.iter().map(|t| t.shape()).collect())
                    .collect(),
            ),
            got: describe(
                grads
                    .iter()
                    .map(|l| l.iter().map(|t| t.shape()).collect())
                    .collect(),
            ),
        });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    bias_correction1: f64,
    bias_correction2: f64,
) {
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bias_correction1;
        let v_hat = v[i] / bias_correction2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
}

/// Forward + MAE + backward over one batch, chunked for parallelism.
/// Returns the summed absolute error and the parameter gradients of the
/// batch-mean loss. Targets must be in the same units as the model output.
fn batch_forward_backward(
    model: &Model,
    inputs: &Tensor,
    targets: &Tensor,
) -> Result<(f64, ModelGrads)> {
    let batch = inputs.dim(0);
    let window = inputs.dim(1);
    let features = inputs.dim(2);
    let inv_batch = 1.0 / batch as f64;

    let ranges: Vec<(usize, usize)> = (0..batch)
        .step_by(GRAD_CHUNK)
        .map(|s| (s, (s + GRAD_CHUNK).min(batch)))
        .collect();

    let partials: Vec<Result<(f64, ModelGrads)>> = ranges
        .par_iter()
        .map(|&(start, end)| {
            let rows = end - start;
            let x = Tensor::from_parts(
                vec![rows, window, features],
                inputs.data()[start * window * features..end * window * features].to_vec(),
            );
            let (pred, caches) = model.forward_with_caches(&x)?;
            let mut sum_abs = 0.0;
            let mut grad = vec![0.0; rows];
            for (g, (&p, &t)) in grad
                .iter_mut()
                .zip(pred.data().iter().zip(&targets.data()[start..end]))
            {
                let diff = p - t;
                sum_abs += diff.abs();
                *g = if diff > 0.0 {
                    inv_batch
                } else if diff < 0.0 {
                    -inv_batch
                } else {
                    0.0
                };
            }
            let grad_out = Tensor::from_parts(vec![rows, 1], grad);
            let (_, grads) = model.backward_with_caches(&caches, &grad_out)?;
            Ok((sum_abs, grads))
        })
        .collect();

    let mut total_abs = 0.0;
    let mut accumulated: Option<ModelGrads> = None;
    for partial in partials {
        let (sum_abs, grads) = partial?;
        total_abs += sum_abs;
        match &mut accumulated {
            None => accumulated = Some(grads),
            Some(acc) => {
                for (acc_layer, layer) in acc.iter_mut().zip(grads) {
                    for (acc_tensor, tensor) in acc_layer.iter_mut().zip(layer) {
                        for (a, b) in acc_tensor.data_mut().iter_mut().zip(tensor.data()) {
                            *a += b;
                        }
                    }
                }
            }
        }
    }
    Ok((total_abs, accumulated.expect("at least one chunk")))
}

/// Predictions over every window, in dataset order, in the model's output
/// units. Chunks are evaluated in parallel and concatenated in order.
pub fn predict_all(model: &Model, ds: &WindowedDataset) -> Result<Vec<f64>> {
    let n = ds.len();
    let window = ds.window();
    let ranges: Vec<(usize, usize)> = (0..n)
        .step_by(EVAL_CHUNK)
        .map(|s| (s, (s + EVAL_CHUNK).min(n)))
        .collect();
    let chunks: Vec<Result<Vec<f64>>> = ranges
        .par_iter()
        .map(|&(start, end)| {
            let x = Tensor::from_parts(
                vec![end - start, window, 1],
                ds.inputs.data()[start * window..end * window].to_vec(),
            );
            Ok(model.predict(&x)?.into_data())
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for chunk in chunks {
        out.extend(chunk?);
    }
    Ok(out)
}

/// Validation MAE in physical units.
fn validation_mae(model: &Model, ds: &WindowedDataset) -> Result<f64> {
    let preds = predict_all(model, ds)?;
    metrics::mae(&preds, &ds.targets_physical())
}

/// Runs the mini-batch training loop.
///
/// Per epoch: a seeded shuffle of the window order (when enabled), then
/// forward / MAE / backward / Adam per batch. The epoch's mean train MAE and
/// a full validation pass are recorded and, when `curve` is given, streamed
/// as `epoch,train_mae,val_mae` CSV lines flushed per epoch. Both MAE
/// columns are in denormalized (physical) units.
pub fn train(
    model: &mut Model,
    train_ds: &WindowedDataset,
    val_ds: &WindowedDataset,
    config: &TrainConfig,
    mut curve: Option<&mut dyn Write>,
) -> Result<TrainHistory> {
    config.validate(train_ds.len())?;
    let n = train_ds.len();
    let targets_physical = train_ds.targets_physical();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(model, config);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..n).collect();

    if let Some(curve) = curve.as_deref_mut() {
        writeln!(curve, "epoch,train_mae,val_mae")?;
        curve.flush()?;
    }

    let mut best_val = f64::INFINITY;
    let mut epochs_since_best = 0usize;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        if config.shuffle {
            order.shuffle(&mut rng);
        }

        let mut epoch_abs_error = 0.0;
        for batch_rows in order.chunks(config.batch_size) {
            let (x, _) = train_ds.gather(batch_rows);
            let y: Vec<f64> = batch_rows.iter().map(|&r| targets_physical[r]).collect();
            let y = Tensor::from_parts(vec![batch_rows.len(), 1], y);
            let (sum_abs, grads) = batch_forward_backward(model, &x, &y)?;
            let batch_loss = sum_abs / batch_rows.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            adam.step(model, &grads)?;
            epoch_abs_error += sum_abs;
        }

        let train_mae = epoch_abs_error / n as f64;
        let val_mae = validation_mae(model, val_ds)?;
        if !val_mae.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let record = EpochRecord {
            epoch,
            train_mae,
            val_mae,
            wall_time: started.elapsed().as_secs_f64(),
        };
        if let Some(curve) = curve.as_deref_mut() {
            writeln!(curve, "{},{},{}", record.epoch, record.train_mae, record.val_mae)?;
            curve.flush()?;
        }
        history.records.push(record);

        if let Some(patience) = config.patience {
            if val_mae < best_val {
                best_val = val_mae;
                epochs_since_best = 0;
            } else {
                epochs_since_best += 1;
                if epochs_since_best >= patience {
                    break;
                }
            }
        }
    }
    history.optimizer_steps = adam.steps_taken();
    Ok(history)
}

/// Scores a model on a dataset: predictions over all windows (already in
/// physical units via the model's scale layer) against denormalized targets.
pub fn evaluate(model: &Model, ds: &WindowedDataset) -> Result<EvalReport> {
    let preds = predict_all(model, ds)?;
    metrics::score(&preds, &ds.targets_physical())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_windows, NormStats, Provenance};
    use crate::model::{build_model, LayerSpec, ModelSpec};
    use crate::tensor::Activation;

    fn tiny_spec() -> ModelSpec {
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
                    return_sequences: false,
                },
                LayerSpec::Dense {
                    units: 1,
                    activation: Activation::Linear,
                },
                LayerSpec::Scale,
            ],
        }
    }

    fn tiny_dataset(len: usize) -> WindowedDataset {
        let values: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin()).collect();
        make_windows(
            &values,
            8,
            1,
            NormStats { mean: 0.0, std: 1.0 },
            Provenance::synthetic(),
        )
        .unwrap()
    }

    #[test]
    fn mae_loss_examples() {
        let pred = Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let (loss, grad) = mae_loss(&pred, &pred).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));

        let target = Tensor::new(vec![2, 1], vec![2.0, 4.0]).unwrap();
        let (loss, grad) = mae_loss(&pred, &target).unwrap();
        assert_eq!(loss, 1.5);
        assert_eq!(grad.data(), &[-0.5, -0.5]);
    }

    #[test]
    fn mae_loss_is_permutation_invariant() {
        let pred = Tensor::new(vec![3, 1], vec![1.0, -2.0, 0.5]).unwrap();
        let target = Tensor::new(vec![3, 1], vec![0.0, 1.0, 0.5]).unwrap();
        let (a, _) = mae_loss(&pred, &target).unwrap();
        let perm_pred = Tensor::new(vec![3, 1], vec![0.5, 1.0, -2.0]).unwrap();
        let perm_target = Tensor::new(vec![3, 1], vec![0.5, 0.0, 1.0]).unwrap();
        let (b, _) = mae_loss(&perm_pred, &perm_target).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mae_loss_grad_matches_finite_differences() {
        let pred = Tensor::new(vec![4, 1], vec![0.3, -1.2, 2.0, 0.7]).unwrap();
        let target = Tensor::new(vec![4, 1], vec![0.1, 0.4, 2.5, -0.3]).unwrap();
        let (_, grad) = mae_loss(&pred, &target).unwrap();
        let eps = 1e-6;
        for i in 0..4 {
            let mut up = pred.data().to_vec();
            up[i] += eps;
            let mut down = pred.data().to_vec();
            down[i] -= eps;
            let (lu, _) = mae_loss(&Tensor::new(vec![4, 1], up).unwrap(), &target).unwrap();
            let (ld, _) = mae_loss(&Tensor::new(vec![4, 1], down).unwrap(), &target).unwrap();
            let fd = (lu - ld) / (2.0 * eps);
            let a = grad.data()[i];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
            assert!(rel < 1e-6, "component {i}: analytic {a} vs fd {fd}");
        }
    }

    /// Independent scalar Adam trace: three steps with a constant gradient.
    #[test]
    fn adam_matches_scalar_hand_trace() {
        let spec = ModelSpec {
            input_window: 2,
            input_features: 1,
            layers: vec![LayerSpec::Lstm {
                units: 1,
                return_sequences: false,
            }],
        };
        let mut model =
            build_model(spec, 0, NormStats { mean: 0.0, std: 1.0 }).unwrap();
        let config = TrainConfig {
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let mut adam = Adam::new(&model, &config);
        let before = model.layer_parameters()[0]
            .iter()
            .map(|t| t.data().to_vec())
            .collect::<Vec<_>>();

        let g = 0.37;
        let grads: ModelGrads = vec![vec![
            Tensor::filled(&[1, 4], g),
            Tensor::filled(&[1, 4], g),
            Tensor::filled(&[4], g),
        ]];

        // oracle for one scalar parameter
        let (lr, b1, b2, eps) = (0.05, 0.9, 0.999, 1e-8);
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut offsets = Vec::new();
        let mut total = 0.0;
        for t in 1..=3u32 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t as i32));
            let v_hat = v / (1.0 - b2.powi(t as i32));
            total -= lr * m_hat / (v_hat.sqrt() + eps);
            offsets.push(total);
        }

        for (step, expected_offset) in offsets.iter().enumerate() {
            adam.step(&mut model, &grads).unwrap();
            let params = model.layer_parameters();
            for (p_idx, tensor) in params[0].iter().enumerate() {
                for (e_idx, value) in tensor.data().iter().enumerate() {
                    let expected = before[p_idx][e_idx] + expected_offset;
                    assert!(
                        (value - expected).abs() < 1e-14,
                        "step {step} param {p_idx}[{e_idx}]: {value} vs {expected}"
                    );
                }
            }
        }
        // first-step magnitude is ~lr for a constant gradient
        assert!((offsets[0].abs() - 0.05).abs() < 1e-6);
    }

    #[test]
    fn adam_zero_gradients_leave_parameters_unchanged() {
        let mut model = build_model(
            tiny_spec(),
            3,
            NormStats { mean: 0.0, std: 1.0 },
        )
        .unwrap();
        let config = TrainConfig::default();
        let mut adam = Adam::new(&model, &config);
        let before: Vec<Vec<f64>> = model
            .layer_parameters()
            .iter()
            .flat_map(|l| l.iter().map(|t| t.data().to_vec()))
            .collect();
        let zero_grads: ModelGrads = model
            .layer_parameters()
            .iter()
            .map(|l| l.iter().map(|t| Tensor::zeros(t.shape())).collect())
            .collect();
        adam.step(&mut model, &zero_grads).unwrap();
        adam.step(&mut model, &zero_grads).unwrap();
        let after: Vec<Vec<f64>> = model
            .layer_parameters()
            .iter()
            .flat_map(|l| l.iter().map(|t| t.data().to_vec()))
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn adam_rejects_layout_mismatch() {
        let mut model = build_model(
            tiny_spec(),
            3,
            NormStats { mean: 0.0, std: 1.0 },
        )
        .unwrap();
        let config = TrainConfig::default();
        let mut adam = Adam::new(&model, &config);
        let bad: ModelGrads = vec![vec![Tensor::zeros(&[2, 2])]];
        assert!(matches!(
            adam.step(&mut model, &bad).unwrap_err(),
            Error::LayoutMismatch { .. }
        ));
    }

    #[test]
    fn one_full_batch_epoch_is_one_step() {
        let ds = tiny_dataset(40);
        let mut model = build_model(
            tiny_spec(),
            1,
            NormStats { mean: 0.0, std: 1.0 },
        )
        .unwrap();
        let config = TrainConfig {
            epochs: 1,
            batch_size: ds.len(),
            ..TrainConfig::default()
        };
        let history = train(&mut model, &ds, &ds, &config, None).unwrap();
        assert_eq!(history.optimizer_steps, 1);
    }

    #[test]
    fn steps_per_epoch_is_ceil_of_ratio() {
        let ds = tiny_dataset(41); // 33 windows
        let mut model = build_model(
            tiny_spec(),
            1,
            NormStats { mean: 0.0, std: 1.0 },
        )
        .unwrap();
        let config = TrainConfig {
            epochs: 3,
            batch_size: 10,
            ..TrainConfig::default()
        };
        let history = train(&mut model, &ds, &ds, &config, None).unwrap();
        let w = ds.len();
        assert_eq!(history.optimizer_steps, 3 * w.div_ceil(10) as u64);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let ds = tiny_dataset(40);
        let mut model = build_model(
            tiny_spec(),
            1,
            NormStats { mean: 0.0, std: 1.0 },
        )
        .unwrap();
        let before: Vec<Vec<f64>> = model
            .layer_parameters()
            .iter()
            .flat_map(|l| l.iter().map(|t| t.data().to_vec()))
            .collect();
        let config = TrainConfig {
            epochs: 2,
            batch_size: 8,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        train(&mut model, &ds, &ds, &config, None).unwrap();
        let after: Vec<Vec<f64>> = model
            .layer_parameters()
            .iter()
            .flat_map(|l| l.iter().map(|t| t.data().to_vec()))
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let ds = tiny_dataset(60);
        let config = TrainConfig {
            epochs: 3,
            batch_size: 16,
            seed: 11,
            ..TrainConfig::default()
        };
        let run = || {
            let mut model = build_model(
                tiny_spec(),
                5,
                NormStats { mean: 0.0, std: 1.0 },
            )
            .unwrap();
            let mut curve = Vec::new();
            let history = train(&mut model, &ds, &ds, &config, Some(&mut curve)).unwrap();
            let params: Vec<Vec<f64>> = model
                .layer_parameters()
                .iter()
                .flat_map(|l| l.iter().map(|t| t.data().to_vec()))
                .collect();
            (history, curve, params)
        };
        let (h1, c1, p1) = run();
        let (h2, c2, p2) = run();
        assert_eq!(c1, c2);
        assert_eq!(p1, p2);
        for (a, b) in h1.records.iter().zip(&h2.records) {
            assert_eq!(a.train_mae.to_bits(), b.train_mae.to_bits());
            assert_eq!(a.val_mae.to_bits(), b.val_mae.to_bits());
        }
    }

    #[test]
    fn perfect_and_mean_predictors_score_as_defined() {
        // a model that always emits the target mean scores r2 = 0
        let ds = tiny_dataset(50);
        let targets = ds.targets_physical();
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        let r2 = metrics::r2_score(&vec![mean; targets.len()], &targets).unwrap();
        assert!(r2.abs() < 1e-12);

        let report = metrics::score(&targets, &targets).unwrap();
        assert_eq!(report.mae, 0.0);
        assert_eq!(report.r2, 1.0);
        assert_eq!(report.variance, 1.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let ds = tiny_dataset(20);
        let mut model = build_model(
            tiny_spec(),
            1,
            NormStats { mean: 0.0, std: 1.0 },
        )
        .unwrap();
        for config in [
            TrainConfig { epochs: 0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { batch_size: 10_000, ..TrainConfig::default() },
            TrainConfig { learning_rate: f64::NAN, ..TrainConfig::default() },
            TrainConfig { beta1: 1.0, ..TrainConfig::default() },
        ] {
            assert!(matches!(
                train(&mut model, &ds, &ds, &config, None).unwrap_err(),
                Error::InvalidConfig(_)
            ));
        }
    }
}
