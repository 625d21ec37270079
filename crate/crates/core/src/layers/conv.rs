use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{conv1d_valid_into, Activation, Tensor};

use super::{check_positive, glorot_uniform};

/// Valid 1-D convolution layer over `[B, T, C_in]` inputs.
///
/// `kernels` is `[K, C_in, F]`, `bias` is `[F]`; the output is
/// `[B, T - K + 1, F]` after the activation.
#[derive(Debug, Clone)]
pub struct Conv1DLayer {
    pub kernels: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    input: Tensor,
    preact: Tensor,
}

impl Conv1DLayer {
    /// Glorot-uniform kernels with receptive-field fan (K*C_in, K*F),
    /// zero bias.
    pub fn init<R: Rng>(
        kernel_size: usize,
        in_channels: usize,
        filters: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        check_positive(
            "Conv1DLayer::init",
            &[
                ("kernel_size", kernel_size),
                ("in_channels", in_channels),
                ("filters", filters),
            ],
        )?;
        Ok(Self {
            kernels: glorot_uniform(
                &[kernel_size, in_channels, filters],
                kernel_size * in_channels,
                kernel_size * filters,
                rng,
            ),
            bias: Tensor::zeros(&[filters]),
            activation,
        })
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels.dim(0)
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.dim(1)
    }

    pub fn filters(&self) -> usize {
        self.kernels.dim(2)
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvCache)> {
        if x.rank() != 3 || x.dim(2) != self.in_channels() {
            return Err(Error::ShapeMismatch {
                context: "conv1d forward".to_string(),
                expected: format!("[B, T, {}]", self.in_channels()),
                got: format!("{:?}", x.shape()),
            });
        }
        let (batch, t_len, c_in) = (x.dim(0), x.dim(1), x.dim(2));
        let k_len = self.kernel_size();
        if t_len < k_len {
            return Err(Error::WindowTooLong {
                input: t_len,
                kernel: k_len,
            });
        }
        let t_out = t_len - k_len + 1;
        let f = self.filters();
        let mut pre = vec![0.0; batch * t_out * f];
        for b in 0..batch {
            conv1d_valid_into(
                &x.data()[b * t_len * c_in..(b + 1) * t_len * c_in],
                t_len,
                c_in,
                self.kernels.data(),
                k_len,
                f,
                self.bias.data(),
                &mut pre[b * t_out * f..(b + 1) * t_out * f],
            );
        }
        let preact = Tensor::from_parts(vec![batch, t_out, f], pre);
        let out = preact.map(|v| self.activation.apply(v));
        Ok((
            out,
            ConvCache {
                input: x.clone(),
                preact,
            },
        ))
    }

    pub fn backward(&self, cache: &ConvCache, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        if grad_out.shape() != cache.preact.shape() {
            return Err(Error::ShapeMismatch {
                context: "conv1d backward".to_string(),
                expected: format!("{:?}", cache.preact.shape()),
                got: format!("{:?}", grad_out.shape()),
            });
        }
        let (batch, t_len, c_in) = (
            cache.input.dim(0),
            cache.input.dim(1),
            cache.input.dim(2),
        );
        let k_len = self.kernel_size();
        let f = self.filters();
        let t_out = t_len - k_len + 1;

        let dz: Vec<f64> = grad_out
            .data()
            .iter()
            .zip(cache.preact.data())
            .map(|(&g, &z)| g * self.activation.derivative(z))
            .collect();

        let mut grad_bias = vec![0.0; f];
        for row in dz.chunks(f) {
            for (gb, &d) in grad_bias.iter_mut().zip(row) {
                *gb += d;
            }
        }

        let mut grad_kernels = vec![0.0; k_len * c_in * f];
        let mut grad_x = vec![0.0; batch * t_len * c_in];
        let kernels = self.kernels.data();
        let x = cache.input.data();
        for b in 0..batch {
            for t in 0..t_out {
                let dz_row = &dz[(b * t_out + t) * f..(b * t_out + t + 1) * f];
                for k in 0..k_len {
                    let x_row = &x[(b * t_len + t + k) * c_in..(b * t_len + t + k + 1) * c_in];
                    let gx_row = (b * t_len + t + k) * c_in;
                    for c in 0..c_in {
                        let base = (k * c_in + c) * f;
                        let gk_row = &mut grad_kernels[base..base + f];
                        let xv = x_row[c];
                        let mut acc = 0.0;
                        for ((gk, &d), &kv) in
                            gk_row.iter_mut().zip(dz_row).zip(&kernels[base..base + f])
                        {
                            *gk += xv * d;
                            acc += d * kv;
                        }
                        grad_x[gx_row + c] += acc;
                    }
                }
            }
        }

        Ok((
            Tensor::from_parts(vec![batch, t_len, c_in], grad_x),
            vec![
                Tensor::from_parts(vec![k_len, c_in, f], grad_kernels),
                Tensor::from_parts(vec![f], grad_bias),
            ],
        ))
    }
}
