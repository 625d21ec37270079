use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{matmul_into, Activation, Tensor};

use super::{check_positive, glorot_uniform};

/// Fully connected layer: `y = activation(x W + b)`.
///
/// `weights` is `[in, out]` row-major, `bias` is `[out]` and broadcast over
/// the batch.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
    preact: Tensor,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        check_positive("DenseLayer::init", &[("in_dim", in_dim), ("out_dim", out_dim)])?;
        Ok(Self {
            weights: glorot_uniform(&[in_dim, out_dim], in_dim, out_dim, rng),
            bias: Tensor::zeros(&[out_dim]),
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.dim(0)
    }

    pub fn out_dim(&self) -> usize {
        self.weights.dim(1)
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, DenseCache)> {
        if x.rank() != 2 || x.dim(1) != self.in_dim() {
            return Err(Error::ShapeMismatch {
                context: "dense forward".to_string(),
                expected: format!("[B, {}]", self.in_dim()),
                got: format!("{:?}", x.shape()),
            });
        }
        let batch = x.dim(0);
        let out_dim = self.out_dim();
        let mut pre = vec![0.0; batch * out_dim];
        for row in pre.chunks_mut(out_dim) {
            row.copy_from_slice(self.bias.data());
        }
        matmul_into(x.data(), batch, self.in_dim(), self.weights.data(), out_dim, &mut pre);
        let preact = Tensor::from_parts(vec![batch, out_dim], pre);
        let out = preact.map(|v| self.activation.apply(v));
        Ok((
            out,
            DenseCache {
                input: x.clone(),
                preact,
            },
        ))
    }

    pub fn backward(&self, cache: &DenseCache, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        if grad_out.shape() != cache.preact.shape() {
            return Err(Error::ShapeMismatch {
                context: "dense backward".to_string(),
                expected: format!("{:?}", cache.preact.shape()),
                got: format!("{:?}", grad_out.shape()),
            });
        }
        let batch = cache.input.dim(0);
        let in_dim = self.in_dim();
        let out_dim = self.out_dim();

        // dz = grad_out * act'(z)
        let dz: Vec<f64> = grad_out
            .data()
            .iter()
            .zip(cache.preact.data())
            .map(|(&g, &z)| g * self.activation.derivative(z))
            .collect();

        let mut grad_bias = vec![0.0; out_dim];
        for row in dz.chunks(out_dim) {
            for (gb, &d) in grad_bias.iter_mut().zip(row) {
                *gb += d;
            }
        }

        // grad_W[k, j] = sum_b x[b, k] * dz[b, j]
        let mut grad_w = vec![0.0; in_dim * out_dim];
        for b in 0..batch {
            let x_row = &cache.input.data()[b * in_dim..(b + 1) * in_dim];
            let dz_row = &dz[b * out_dim..(b + 1) * out_dim];
            for (k, &xv) in x_row.iter().enumerate() {
                let w_row = &mut grad_w[k * out_dim..(k + 1) * out_dim];
                for (gw, &d) in w_row.iter_mut().zip(dz_row) {
                    *gw += xv * d;
                }
            }
        }

        // grad_x[b, k] = sum_j dz[b, j] * W[k, j]
        let mut grad_x = vec![0.0; batch * in_dim];
        let w = self.weights.data();
        for b in 0..batch {
            let dz_row = &dz[b * out_dim..(b + 1) * out_dim];
            let gx_row = &mut grad_x[b * in_dim..(b + 1) * in_dim];
            for (k, gx) in gx_row.iter_mut().enumerate() {
                let w_row = &w[k * out_dim..(k + 1) * out_dim];
                let mut acc = 0.0;
                for (d, wv) in dz_row.iter().zip(w_row) {
                    acc += d * wv;
                }
                *gx = acc;
            }
        }

        Ok((
            Tensor::from_parts(vec![batch, in_dim], grad_x),
            vec![
                Tensor::from_parts(vec![in_dim, out_dim], grad_w),
                Tensor::from_parts(vec![out_dim], grad_bias),
            ],
        ))
    }
}
