use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Elementwise affine map `y = scale * x + offset` with no trainable
/// parameters.
///
/// In forecasting models this is the denormalization step: `scale` and
/// `offset` come from the training-data normalization statistics
/// (std and mean), so predictions leave the network in physical units.
#[derive(Debug, Clone, Copy)]
pub struct AffineScale {
    pub scale: f64,
    pub offset: f64,
}

#[derive(Debug, Clone)]
pub struct ScaleCache {
    input_shape: Vec<usize>,
}

impl AffineScale {
    pub fn new(scale: f64, offset: f64) -> Result<Self> {
        if scale == 0.0 || !scale.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidDimension {
                context: "AffineScale::new".to_string(),
                detail: format!("scale must be finite and nonzero, offset finite (scale={scale}, offset={offset})"),
            });
        }
        Ok(Self { scale, offset })
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ScaleCache)> {
        Ok((
            x.map(|v| self.scale * v + self.offset),
            ScaleCache {
                input_shape: x.shape().to_vec(),
            },
        ))
    }

    /// Inverse map `(y - offset) / scale`.
    pub fn invert(&self, y: &Tensor) -> Tensor {
        y.map(|v| (v - self.offset) / self.scale)
    }

    pub fn backward(&self, cache: &ScaleCache, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        if grad_out.shape() != cache.input_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                context: "scale backward".to_string(),
                expected: format!("{:?}", cache.input_shape),
                got: format!("{:?}", grad_out.shape()),
            });
        }
        Ok((grad_out.map(|v| v * self.scale), vec![]))
    }
}
