//! Dense tensor storage and the numeric kernels every layer builds on.
//!
//! Tensors are immutable values once constructed: row-major `f64` storage
//! with an explicit shape list, no strides, no broadcasting. All kernels are
//! pure functions with a deterministic left-to-right accumulation order, so
//! identical inputs always produce bit-identical outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense N-dimensional array of `f64` in row-major order.
///
/// Invariant: `shape.iter().product() == data.len()`. Construction through
/// [`Tensor::new`] additionally rejects non-finite values so NaN/Inf cannot
/// enter through a public boundary unnoticed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, validating the shape/data contract and finiteness.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch {
                context: "Tensor::new".to_string(),
                expected: format!("{} elements for shape {:?}", expected, shape),
                got: format!("{} elements", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "Tensor::new".to_string(),
            });
        }
        Ok(Self { shape, data })
    }

    /// Internal constructor for values produced by kernels that cannot
    /// introduce non-finite elements from finite inputs.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// 2-D convenience constructor from nested rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidDimension {
                context: "Tensor::from_rows".to_string(),
                detail: "ragged rows".to_string(),
            });
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Tensor::new(vec![r, c], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Standard matrix product of two rank-2 tensors.
    ///
    /// Accumulation runs left to right over the inner index, so repeated
    /// calls are bit-identical.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || rhs.rank() != 2 {
            return Err(Error::ShapeMismatch {
                context: "matmul".to_string(),
                expected: "two rank-2 tensors".to_string(),
                got: format!("{:?} x {:?}", self.shape, rhs.shape),
            });
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (rhs.shape[0], rhs.shape[1]);
        if k != k2 {
            return Err(Error::ShapeMismatch {
                context: "matmul".to_string(),
                expected: format!("inner dimensions to agree ({:?} x {:?})", self.shape, rhs.shape),
                got: format!("{} vs {}", k, k2),
            });
        }
        let mut out = vec![0.0; m * n];
        matmul_into(&self.data, m, k, &rhs.data, n, &mut out);
        Ok(Tensor::from_parts(vec![m, n], out))
    }

    /// Elementwise map; preserves shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }
}

/// out[m x n] += a[m x k] * b[k x n], row-major. `out` must be zeroed by the
/// caller when a plain product is wanted.
///
/// Plain mul+add rather than fused ops: strict IEEE semantics keep results
/// bit-identical across targets, and the loops autovectorize.
pub(crate) fn matmul_into(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row.iter()) {
                *o += av * bv;
            }
        }
    }
}

/// Elementwise activation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative as a function of the pre-activation input.
    /// The ReLU subgradient at 0 is taken to be 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Linear => 1.0,
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        };
        write!(f, "{name}")
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Applies an activation elementwise; shape is preserved.
pub fn activation(x: &Tensor, kind: Activation) -> Tensor {
    x.map(|v| kind.apply(v))
}

/// Arithmetic mean over all elements, accumulated left to right.
pub fn reduce_mean(x: &Tensor) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyTensor {
            context: "reduce_mean".to_string(),
        });
    }
    let sum: f64 = x.data.iter().sum();
    Ok(sum / x.data.len() as f64)
}

/// Valid (no padding) 1-D cross-correlation with stride 1.
///
/// `input` is `[T, C_in]`, `kernels` is `[K, C_in, C_out]`, `bias` is
/// `[C_out]`; the output is `[T - K + 1, C_out]` with
/// `out[t][f] = bias[f] + sum_{k,c} input[t+k][c] * kernels[k][c][f]`.
pub fn conv1d_valid(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if input.rank() != 2 || kernels.rank() != 3 || bias.rank() != 1 {
        return Err(Error::ShapeMismatch {
            context: "conv1d_valid".to_string(),
            expected: "input [T,C_in], kernels [K,C_in,C_out], bias [C_out]".to_string(),
            got: format!(
                "{:?}, {:?}, {:?}",
                input.shape, kernels.shape, bias.shape
            ),
        });
    }
    let (t_len, c_in) = (input.shape[0], input.shape[1]);
    let (k_len, kc_in, c_out) = (kernels.shape[0], kernels.shape[1], kernels.shape[2]);
    if c_in != kc_in || bias.shape[0] != c_out {
        return Err(Error::ShapeMismatch {
            context: "conv1d_valid".to_string(),
            expected: format!("kernel channels {} and bias length {}", c_in, c_out),
            got: format!("kernel channels {}, bias length {}", kc_in, bias.shape[0]),
        });
    }
    if t_len < k_len {
        return Err(Error::WindowTooLong {
            input: t_len,
            kernel: k_len,
        });
    }
    let t_out = t_len - k_len + 1;
    let mut out = vec![0.0; t_out * c_out];
    conv1d_valid_into(
        &input.data, t_len, c_in, &kernels.data, k_len, c_out, &bias.data, &mut out,
    );
    Ok(Tensor::from_parts(vec![t_out, c_out], out))
}

/// Inner conv kernel on raw slices; `out` is `[T-K+1, C_out]` and is
/// overwritten.
pub(crate) fn conv1d_valid_into(
    input: &[f64],
    t_len: usize,
    c_in: usize,
    kernels: &[f64],
    k_len: usize,
    c_out: usize,
    bias: &[f64],
    out: &mut [f64],
) {
    let t_out = t_len - k_len + 1;
    debug_assert_eq!(out.len(), t_out * c_out);
    for t in 0..t_out {
        let out_row = &mut out[t * c_out..(t + 1) * c_out];
        out_row.copy_from_slice(bias);
        for k in 0..k_len {
            let in_row = &input[(t + k) * c_in..(t + k + 1) * c_in];
            for (c, &xv) in in_row.iter().enumerate() {
                let k_row = &kernels[(k * c_in + c) * c_out..(k * c_in + c + 1) * c_out];
                for (o, &kv) in out_row.iter_mut().zip(k_row.iter()) {
                    *o += xv * kv;
                }
            }
        }
    }
}
