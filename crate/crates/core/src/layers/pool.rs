use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Global average pooling over the time axis: `[B, T, C] -> [B, C]`.
/// No trainable parameters.
#[derive(Debug, Clone, Copy)]
pub struct GlobalAvgPool;

#[derive(Debug, Clone)]
pub struct PoolCache {
    input_shape: Vec<usize>,
}

impl GlobalAvgPool {
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, PoolCache)> {
        if x.rank() != 3 {
            return Err(Error::ShapeMismatch {
                context: "global_avg_pool forward".to_string(),
                expected: "[B, T, C]".to_string(),
                got: format!("{:?}", x.shape()),
            });
        }
        let (batch, t_len, ch) = (x.dim(0), x.dim(1), x.dim(2));
        let mut out = vec![0.0; batch * ch];
        let data = x.data();
        for b in 0..batch {
            let out_row = &mut out[b * ch..(b + 1) * ch];
            for t in 0..t_len {
                let row = &data[(b * t_len + t) * ch..(b * t_len + t + 1) * ch];
                for (o, &v) in out_row.iter_mut().zip(row) {
                    *o += v;
                }
            }
            for o in out_row.iter_mut() {
                *o /= t_len as f64;
            }
        }
        Ok((
            Tensor::from_parts(vec![batch, ch], out),
            PoolCache {
                input_shape: x.shape().to_vec(),
            },
        ))
    }

    pub fn backward(&self, cache: &PoolCache, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let (batch, t_len, ch) = (
            cache.input_shape[0],
            cache.input_shape[1],
            cache.input_shape[2],
        );
        if grad_out.shape() != [batch, ch] {
            return Err(Error::ShapeMismatch {
                context: "global_avg_pool backward".to_string(),
                expected: format!("[{batch}, {ch}]"),
                got: format!("{:?}", grad_out.shape()),
            });
        }
        let scale = 1.0 / t_len as f64;
        let mut grad_x = vec![0.0; batch * t_len * ch];
        for b in 0..batch {
            let g_row = &grad_out.data()[b * ch..(b + 1) * ch];
            for t in 0..t_len {
                let out_row = &mut grad_x[(b * t_len + t) * ch..(b * t_len + t + 1) * ch];
                for (o, &g) in out_row.iter_mut().zip(g_row) {
                    *o = g * scale;
                }
            }
        }
        Ok((Tensor::from_parts(cache.input_shape.clone(), grad_x), vec![]))
    }
}
