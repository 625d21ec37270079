//! Network layers: parameter initialization, forward passes that cache the
//! activations needed later, and exact analytic backward passes.
//!
//! Parameters are plain [`Tensor`]s; forward returns the output together with
//! a cache value, and backward consumes that cache. Keeping the cache outside
//! the parameter struct lets several threads run the same (read-only) layer
//! over different sub-batches.

mod conv;
mod dense;
mod lstm;
mod pool;
mod scale;

pub use conv::{Conv1DLayer, ConvCache};
pub use dense::{DenseCache, DenseLayer};
pub use lstm::{LstmCache, LstmLayer};
pub use pool::{GlobalAvgPool, PoolCache};
pub use scale::{AffineScale, ScaleCache};

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Glorot-uniform sample limit: sqrt(6 / (fan_in + fan_out)).
pub(crate) fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Draws a weight tensor elementwise in row-major order, so a given RNG
/// stream always yields bit-identical parameters.
pub(crate) fn glorot_uniform<R: Rng>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor {
    let limit = glorot_limit(fan_in, fan_out);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::from_parts(shape.to_vec(), data)
}

pub(crate) fn check_positive(context: &str, dims: &[(&str, usize)]) -> Result<()> {
    for (name, value) in dims {
        if *value == 0 {
            return Err(Error::InvalidDimension {
                context: context.to_string(),
                detail: format!("{name} must be positive"),
            });
        }
    }
    Ok(())
}

/// One layer of a sequential model.
#[derive(Debug, Clone)]
pub enum Layer {
    Dense(DenseLayer),
    Conv1D(Conv1DLayer),
    Lstm(LstmLayer),
    Pool(GlobalAvgPool),
    Scale(AffineScale),
}

/// Forward activations cached by a layer for its backward pass.
#[derive(Debug, Clone)]
pub enum LayerCache {
    Dense(DenseCache),
    Conv1D(ConvCache),
    Lstm(LstmCache),
    Pool(PoolCache),
    Scale(ScaleCache),
}

impl Layer {
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LayerCache)> {
        match self {
            Layer::Dense(l) => l.forward(x).map(|(y, c)| (y, LayerCache::Dense(c))),
            Layer::Conv1D(l) => l.forward(x).map(|(y, c)| (y, LayerCache::Conv1D(c))),
            Layer::Lstm(l) => l.forward(x).map(|(y, c)| (y, LayerCache::Lstm(c))),
            Layer::Pool(l) => l.forward(x).map(|(y, c)| (y, LayerCache::Pool(c))),
            Layer::Scale(l) => l.forward(x).map(|(y, c)| (y, LayerCache::Scale(c))),
        }
    }

    /// Reverse-mode step: returns the gradient w.r.t. the forward input and
    /// the parameter gradients in [`Layer::parameters`] order.
    pub fn backward(&self, cache: &LayerCache, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        match (self, cache) {
            (Layer::Dense(l), LayerCache::Dense(c)) => l.backward(c, grad_out),
            (Layer::Conv1D(l), LayerCache::Conv1D(c)) => l.backward(c, grad_out),
            (Layer::Lstm(l), LayerCache::Lstm(c)) => l.backward(c, grad_out),
            (Layer::Pool(l), LayerCache::Pool(c)) => l.backward(c, grad_out),
            (Layer::Scale(l), LayerCache::Scale(c)) => l.backward(c, grad_out),
            _ => Err(Error::MissingCache),
        }
    }

    pub fn parameters(&self) -> Vec<&Tensor> {
        match self {
            Layer::Dense(l) => vec![&l.weights, &l.bias],
            Layer::Conv1D(l) => vec![&l.kernels, &l.bias],
            Layer::Lstm(l) => vec![&l.input_weights, &l.recurrent_weights, &l.bias],
            Layer::Pool(_) | Layer::Scale(_) => vec![],
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Dense(l) => vec![&mut l.weights, &mut l.bias],
            Layer::Conv1D(l) => vec![&mut l.kernels, &mut l.bias],
            Layer::Lstm(l) => vec![&mut l.input_weights, &mut l.recurrent_weights, &mut l.bias],
            Layer::Pool(_) | Layer::Scale(_) => vec![],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }

    /// Short human-readable description used in parameter-count reports.
    pub fn describe(&self) -> String {
        match self {
            Layer::Dense(l) => format!(
                "dense (units={}, {})",
                l.bias.len(),
                l.activation
            ),
            Layer::Conv1D(l) => format!(
                "conv1d (filters={}, kernel={})",
                l.bias.len(),
                l.kernels.dim(0)
            ),
            Layer::Lstm(l) => format!(
                "lstm (units={}, return_sequences={})",
                l.units, l.return_sequences
            ),
            Layer::Pool(_) => "global_avg_pool".to_string(),
            Layer::Scale(l) => format!("scale (scale={}, offset={})", l.scale, l.offset),
        }
    }
}
