//! Comparison models: ordinary least squares over flattened windows, plus
//! conv-only and LSTM-only stacks assembled from the same layer kernels,
//! and the four-way benchmark that scores them on identical data.

use serde::{Deserialize, Serialize};

use crate::data::{NormStats, WindowedDataset};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::{build_model, LayerSpec, Model, ModelSpec};
use crate::tensor::{Activation, Tensor};
use crate::train::{self, TrainConfig};

/// Linear next-step predictor fit on normalized windows; predictions are
/// denormalized before scoring so all models report in the same units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinRegModel {
    pub coefficients: Tensor,
    pub intercept: f64,
    pub normalization: NormStats,
}

/// Least-squares fit of flattened windows against targets via the normal
/// equations, with a tiny ridge term (excluding the intercept) for
/// numerical stability on near-collinear windows.
pub fn linreg_fit(ds: &WindowedDataset, ridge_lambda: f64) -> Result<LinRegModel> {
    let samples = ds.len();
    let window = ds.window();
    if samples <= window {
        return Err(Error::Underdetermined {
            samples,
            features: window,
        });
    }
    let dim = window + 1; // intercept column last
    let xs = ds.inputs.data();
    let ys = ds.targets.data();

    // A = X^T X + lambda * diag(1..1, 0), b = X^T y
    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim];
    for s in 0..samples {
        let row = &xs[s * window..(s + 1) * window];
        let y = ys[s];
        for i in 0..window {
            let xi = row[i];
            let a_row = &mut a[i * dim..i * dim + window];
            for (j, aj) in a_row.iter_mut().enumerate() {
                *aj += xi * row[j];
            }
            a[i * dim + window] += xi; // intercept column
            b[i] += xi * y;
        }
        b[window] += y;
    }
    for j in 0..window {
        // X^T X is symmetric; mirror the intercept column into its row
        a[window * dim + j] = a[j * dim + window];
    }
    a[window * dim + window] = samples as f64;
    for i in 0..window {
        a[i * dim + i] += ridge_lambda;
    }

    let solution = solve_linear_system(&mut a, &mut b, dim)?;
    Ok(LinRegModel {
        coefficients: Tensor::from_parts(vec![window], solution[..window].to_vec()),
        intercept: solution[window],
        normalization: ds.normalization,
    })
}

/// Gaussian elimination with partial pivoting; consumes its inputs.
fn solve_linear_system(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1 * n + col].abs().total_cmp(&a[r2 * n + col].abs()))
            .expect("non-empty range");
        if a[pivot_row * n + col].abs() < 1e-300 {
            return Err(Error::Underdetermined {
                samples: n,
                features: n,
            });
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in row + 1..n {
            acc -= a[row * n + j] * x[j];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

impl LinRegModel {
    /// Predictions in physical units for a `[W, window, 1]` input tensor of
    /// normalized windows.
    pub fn predict(&self, inputs: &Tensor) -> Result<Vec<f64>> {
        let window = self.coefficients.len();
        if inputs.rank() != 3 || inputs.dim(1) != window {
            return Err(Error::ShapeMismatch {
                context: "linreg predict".to_string(),
                expected: format!("[W, {window}, 1]"),
                got: format!("{:?}", inputs.shape()),
            });
        }
        let coef = self.coefficients.data();
        Ok(inputs
            .data()
            .chunks(window)
            .map(|row| {
                let mut acc = self.intercept;
                for (x, c) in row.iter().zip(coef) {
                    acc += x * c;
                }
                self.normalization.invert(acc)
            })
            .collect())
    }

    pub fn evaluate(&self, ds: &WindowedDataset) -> Result<EvalReport> {
        let preds = self.predict(&ds.inputs)?;
        crate::metrics::score(&preds, &ds.targets_physical())
    }
}

/// Conv-only stack: the conv block of the hybrid, global average pooling
/// over time, and the same dense head.
pub fn cnn_only_spec() -> ModelSpec {
    cnn_only_spec_with_window(60)
}

pub fn cnn_only_spec_with_window(window: usize) -> ModelSpec {
    ModelSpec {
        input_window: window,
        input_features: 1,
        layers: vec![
            LayerSpec::Conv1d {
                filters: 60,
                kernel_size: 5,
            },
            LayerSpec::GlobalAvgPool,
            LayerSpec::Dense {
                units: 30,
                activation: Activation::Relu,
            },
            LayerSpec::Dense {
                units: 10,
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

/// LSTM-only stack: two 60-unit LSTMs and the shared dense head.
pub fn lstm_only_spec() -> ModelSpec {
    lstm_only_spec_with_window(60)
}

pub fn lstm_only_spec_with_window(window: usize) -> ModelSpec {
    ModelSpec {
        input_window: window,
        input_features: 1,
        layers: vec![
            LayerSpec::Lstm {
                units: 60,
                return_sequences: true,
            },
            LayerSpec::Lstm {
                units: 60,
                return_sequences: false,
            },
            LayerSpec::Dense {
                units: 30,
                activation: Activation::Relu,
            },
            LayerSpec::Dense {
                units: 10,
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

pub fn build_cnn_only(seed: u64, scale: f64, offset: f64) -> Result<Model> {
    build_model(
        cnn_only_spec(),
        seed,
        NormStats {
            mean: offset,
            std: scale,
        },
    )
}

pub fn build_lstm_only(seed: u64, scale: f64, offset: f64) -> Result<Model> {
    build_model(
        lstm_only_spec(),
        seed,
        NormStats {
            mean: offset,
            std: scale,
        },
    )
}

/// One model's outcome in a comparison run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelComparison {
    pub model: String,
    /// Per-seed reports, in seed order.
    pub runs: Vec<EvalReport>,
    /// Metric-wise mean over seeds; absent when every run failed.
    pub mean: Option<EvalReport>,
    /// Metric-wise sample standard deviation over seeds (0 for one seed).
    pub spread: Option<EvalReport>,
    /// Fingerprint of the exact (train, test) tensors this row was scored
    /// on; equal across rows of one comparison by construction.
    pub data_hash: String,
    pub error: Option<String>,
}

fn metric_stats(runs: &[EvalReport]) -> (EvalReport, EvalReport) {
    let n = runs.len() as f64;
    let mean = EvalReport {
        variance: runs.iter().map(|r| r.variance).sum::<f64>() / n,
        r2: runs.iter().map(|r| r.r2).sum::<f64>() / n,
        mae: runs.iter().map(|r| r.mae).sum::<f64>() / n,
    };
    let spread = if runs.len() < 2 {
        EvalReport {
            variance: 0.0,
            r2: 0.0,
            mae: 0.0,
        }
    } else {
        let sd = |f: fn(&EvalReport) -> f64, m: f64| {
            (runs.iter().map(|r| (f(r) - m) * (f(r) - m)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        EvalReport {
            variance: sd(|r| r.variance, mean.variance),
            r2: sd(|r| r.r2, mean.r2),
            mae: sd(|r| r.mae, mean.mae),
        }
    };
    (mean, spread)
}

/// Trains and scores the four comparison models on identical data.
///
/// Every neural model is trained once per seed with `config` (the seed
/// replacing `config.seed`); the linear baseline is deterministic so its
/// per-seed runs coincide. A failing model is reported in its row without
/// aborting the others.
pub fn compare_models(
    train_ds: &WindowedDataset,
    test_ds: &WindowedDataset,
    config: &TrainConfig,
    seeds: &[u64],
) -> Vec<ModelComparison> {
    let norm = train_ds.normalization;
    let mut hash_input = train_ds.content_hash();
    hash_input.push_str(&test_ds.content_hash());
    let data_hash = {
        use sha2::{Digest, Sha256};
        crate::data::hex_string(&Sha256::digest(hash_input.as_bytes()))
    };

    let window = train_ds.window();
    let train_spec = |spec: ModelSpec, seed: u64| -> Result<EvalReport> {
        let mut model = build_model(spec, seed, norm)?;
        let cfg = TrainConfig { seed, ..config.clone() };
        train::train(&mut model, train_ds, test_ds, &cfg, None)?;
        train::evaluate(&model, test_ds)
    };
    let train_spec = &train_spec;
    let builders: Vec<(&str, Box<dyn Fn(u64) -> Result<EvalReport> + '_>)> = vec![
        (
            "Linear Regression",
            Box::new(|_seed| linreg_fit(train_ds, 1e-8)?.evaluate(test_ds)),
        ),
        (
            "CNN",
            Box::new(move |seed| train_spec(cnn_only_spec_with_window(window), seed)),
        ),
        (
            "LSTM",
            Box::new(move |seed| train_spec(lstm_only_spec_with_window(window), seed)),
        ),
        (
            "CNN-LSTM",
            Box::new(move |seed| {
                train_spec(crate::model::cnn_lstm_spec_with_window(window), seed)
            }),
        ),
    ];

    builders
        .into_iter()
        .map(|(name, run)| {
            let mut runs = Vec::new();
            let mut error = None;
            for &seed in seeds {
                match run(seed) {
                    Ok(report) => runs.push(report),
                    Err(e) => {
                        error = Some(e.to_string());
                        break;
                    }
                }
            }
            let (mean, spread) = if runs.is_empty() {
                (None, None)
            } else {
                let (m, s) = metric_stats(&runs);
                (Some(m), Some(s))
            };
            ModelComparison {
                model: name.to_string(),
                runs,
                mean,
                spread,
                data_hash: data_hash.clone(),
                error,
            }
        })
        .collect()
}

/// Renders comparison rows as an aligned text table with columns
/// Model, Variance, R2 Score, MAE. With several seeds each cell shows
/// `mean ± spread`.
pub fn render_table(rows: &[ModelComparison]) -> String {
    let multi = rows.iter().any(|r| r.runs.len() > 1);
    let cell = |mean: f64, spread: f64| {
        if multi {
            format!("{mean:.3} ± {spread:.3}")
        } else {
            format!("{mean:.3}")
        }
    };
    let mut table: Vec<[String; 4]> = vec![[
        "Model".to_string(),
        "Variance".to_string(),
        "R2 Score".to_string(),
        "MAE".to_string(),
    ]];
    for row in rows {
        match (&row.mean, &row.spread) {
            (Some(mean), Some(spread)) => table.push([
                row.model.clone(),
                cell(mean.variance, spread.variance),
                cell(mean.r2, spread.r2),
                cell(mean.mae, spread.mae),
            ]),
            _ => table.push([
                row.model.clone(),
                "failed".to_string(),
                "failed".to_string(),
                row.error.clone().unwrap_or_else(|| "failed".to_string()),
            ]),
        }
    }
    let widths: Vec<usize> = (0..4)
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (idx, row) in table.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            if c < 3 {
                out.push_str(&" ".repeat(widths[c] - cell.len()));
            }
        }
        out.push('\n');
        if idx == 0 {
            let total: usize = widths.iter().sum::<usize>() + 6;
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}
