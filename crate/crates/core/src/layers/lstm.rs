//! LSTM layer with exact backpropagation through time.
//!
//! Per timestep, with `z = x_t W + h_{t-1} R + b` split into four
//! unit-sized blocks along the last axis in the fixed order
//! `[input, forget, candidate, output]`:
//!
//! ```text
//! i = sigmoid(z_i)   f = sigmoid(z_f)   g = tanh(z_g)   o = sigmoid(z_o)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```
//!
//! Initial hidden and cell state are zero. `return_sequences` selects
//! between emitting every `h_t` (`[B, T, U]`) and only `h_T` (`[B, U]`).

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{sigmoid, Tensor};

use super::{check_positive, glorot_uniform};

/// `input_weights` is `[in, 4U]`, `recurrent_weights` is `[U, 4U]`, `bias`
/// is `[4U]`, all with the gate blocks ordered `[i, f, g, o]`.
#[derive(Debug, Clone)]
pub struct LstmLayer {
    pub input_weights: Tensor,
    pub recurrent_weights: Tensor,
    pub bias: Tensor,
    pub units: usize,
    pub return_sequences: bool,
}

/// Activations retained for BPTT, each a flat `[T, B, U]` buffer indexed
/// `(t * batch + b) * units + u`.
#[derive(Debug, Clone)]
pub struct LstmCache {
    input: Tensor,
    gate_i: Vec<f64>,
    gate_f: Vec<f64>,
    gate_g: Vec<f64>,
    gate_o: Vec<f64>,
    cell: Vec<f64>,
    tanh_cell: Vec<f64>,
    hidden: Vec<f64>,
}

impl LstmLayer {
    /// Glorot-uniform weight matrices, zero bias except the forget-gate
    /// block, which starts at 1.0.
    pub fn init<R: Rng>(
        in_dim: usize,
        units: usize,
        return_sequences: bool,
        rng: &mut R,
    ) -> Result<Self> {
        check_positive("LstmLayer::init", &[("in_dim", in_dim), ("units", units)])?;
        let input_weights = glorot_uniform(&[in_dim, 4 * units], in_dim, 4 * units, rng);
        let recurrent_weights = glorot_uniform(&[units, 4 * units], units, 4 * units, rng);
        let mut bias = Tensor::zeros(&[4 * units]);
        bias.data_mut()[units..2 * units].fill(1.0);
        Ok(Self {
            input_weights,
            recurrent_weights,
            bias,
            units,
            return_sequences,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.input_weights.dim(0)
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LstmCache)> {
        let in_dim = self.in_dim();
        if x.rank() != 3 || x.dim(2) != in_dim {
            return Err(Error::ShapeMismatch {
                context: "lstm forward".to_string(),
                expected: format!("[B, T, {}]", in_dim),
                got: format!("{:?}", x.shape()),
            });
        }
        let (batch, t_len) = (x.dim(0), x.dim(1));
        let units = self.units;
        let gate_width = 4 * units;
        let states = t_len * batch * units;
        let w = self.input_weights.data();
        let r = self.recurrent_weights.data();
        let xs = x.data();

        let mut cache = LstmCache {
            input: x.clone(),
            gate_i: vec![0.0; states],
            gate_f: vec![0.0; states],
            gate_g: vec![0.0; states],
            gate_o: vec![0.0; states],
            cell: vec![0.0; states],
            tanh_cell: vec![0.0; states],
            hidden: vec![0.0; states],
        };

        let mut z = vec![0.0; batch * gate_width];

        for t in 0..t_len {
            // z = b + x_t W + h_{t-1} R
            for z_row in z.chunks_mut(gate_width) {
                z_row.copy_from_slice(self.bias.data());
            }
            for b in 0..batch {
                let x_row = &xs[(b * t_len + t) * in_dim..(b * t_len + t + 1) * in_dim];
                let z_row = &mut z[b * gate_width..(b + 1) * gate_width];
                for (k, &xv) in x_row.iter().enumerate() {
                    let w_row = &w[k * gate_width..(k + 1) * gate_width];
                    for (zv, &wv) in z_row.iter_mut().zip(w_row) {
                        *zv += xv * wv;
                    }
                }
                if t > 0 {
                    let h_base = ((t - 1) * batch + b) * units;
                    let h_row = &cache.hidden[h_base..h_base + units];
                    for (k, &hv) in h_row.iter().enumerate() {
                        let r_row = &r[k * gate_width..(k + 1) * gate_width];
                        for (zv, &rv) in z_row.iter_mut().zip(r_row) {
                            *zv += hv * rv;
                        }
                    }
                }
            }

            let step = t * batch * units;
            for b in 0..batch {
                let z_row = &z[b * gate_width..(b + 1) * gate_width];
                for u in 0..units {
                    let idx = step + b * units + u;
                    let i = sigmoid(z_row[u]);
                    let f = sigmoid(z_row[units + u]);
                    let g = z_row[2 * units + u].tanh();
                    let o = sigmoid(z_row[3 * units + u]);
                    let c_prev = if t == 0 {
                        0.0
                    } else {
                        cache.cell[idx - batch * units]
                    };
                    let c = f * c_prev + i * g;
                    let tc = c.tanh();
                    cache.gate_i[idx] = i;
                    cache.gate_f[idx] = f;
                    cache.gate_g[idx] = g;
                    cache.gate_o[idx] = o;
                    cache.cell[idx] = c;
                    cache.tanh_cell[idx] = tc;
                    cache.hidden[idx] = o * tc;
                }
            }
        }

        let out = if self.return_sequences {
            let mut data = vec![0.0; batch * t_len * units];
            for t in 0..t_len {
                for b in 0..batch {
                    let src = (t * batch + b) * units;
                    let dst = (b * t_len + t) * units;
                    data[dst..dst + units].copy_from_slice(&cache.hidden[src..src + units]);
                }
            }
            Tensor::from_parts(vec![batch, t_len, units], data)
        } else {
            let last = (t_len - 1) * batch * units;
            Tensor::from_parts(
                vec![batch, units],
                cache.hidden[last..last + batch * units].to_vec(),
            )
        };
        Ok((out, cache))
    }

    pub fn backward(&self, cache: &LstmCache, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let (batch, t_len) = (cache.input.dim(0), cache.input.dim(1));
        let in_dim = self.in_dim();
        let units = self.units;
        let expected: Vec<usize> = if self.return_sequences {
            vec![batch, t_len, units]
        } else {
            vec![batch, units]
        };
        if grad_out.shape() != expected.as_slice() {
            return Err(Error::ShapeMismatch {
                context: "lstm backward".to_string(),
                expected: format!("{:?}", expected),
                got: format!("{:?}", grad_out.shape()),
            });
        }

        let gate_width = 4 * units;
        let w = self.input_weights.data();
        let r = self.recurrent_weights.data();
        let xs = cache.input.data();
        let go_data = grad_out.data();

        let mut grad_w = vec![0.0; in_dim * gate_width];
        let mut grad_r = vec![0.0; units * gate_width];
        let mut grad_b = vec![0.0; gate_width];
        let mut grad_x = vec![0.0; batch * t_len * in_dim];

        let mut dh_next = vec![0.0; batch * units];
        let mut dc_next = vec![0.0; batch * units];
        let mut d_gates = vec![0.0; batch * gate_width];

        for t in (0..t_len).rev() {
            let step = t * batch * units;
            for b in 0..batch {
                for u in 0..units {
                    let idx = step + b * units + u;
                    let flat = b * units + u;
                    let upstream = if self.return_sequences {
                        go_data[(b * t_len + t) * units + u]
                    } else if t == t_len - 1 {
                        go_data[flat]
                    } else {
                        0.0
                    };
                    let (gi, gf, gg, go) = (
                        cache.gate_i[idx],
                        cache.gate_f[idx],
                        cache.gate_g[idx],
                        cache.gate_o[idx],
                    );
                    let tanh_c = cache.tanh_cell[idx];
                    let c_prev = if t == 0 {
                        0.0
                    } else {
                        cache.cell[idx - batch * units]
                    };
                    let dh = upstream + dh_next[flat];
                    let dc = dh * go * (1.0 - tanh_c * tanh_c) + dc_next[flat];

                    let z_row = b * gate_width;
                    d_gates[z_row + u] = dc * gg * gi * (1.0 - gi);
                    d_gates[z_row + units + u] = dc * c_prev * gf * (1.0 - gf);
                    d_gates[z_row + 2 * units + u] = dc * gi * (1.0 - gg * gg);
                    d_gates[z_row + 3 * units + u] = dh * tanh_c * go * (1.0 - go);

                    dc_next[flat] = dc * gf;
                }
            }

            let h_prev_base = if t == 0 { 0 } else { (t - 1) * batch * units };
            for b in 0..batch {
                let dg_row = &d_gates[b * gate_width..(b + 1) * gate_width];
                for (gb, &d) in grad_b.iter_mut().zip(dg_row) {
                    *gb += d;
                }

                // grad_W += x_t^T d_gates
                let x_row = &xs[(b * t_len + t) * in_dim..(b * t_len + t + 1) * in_dim];
                for (k, &xv) in x_row.iter().enumerate() {
                    let gw_row = &mut grad_w[k * gate_width..(k + 1) * gate_width];
                    for (gw, &d) in gw_row.iter_mut().zip(dg_row) {
                        *gw += xv * d;
                    }
                }

                // grad_R += h_{t-1}^T d_gates
                if t > 0 {
                    let h_row = &cache.hidden[h_prev_base + b * units..h_prev_base + (b + 1) * units];
                    for (k, &hv) in h_row.iter().enumerate() {
                        let gr_row = &mut grad_r[k * gate_width..(k + 1) * gate_width];
                        for (gr, &d) in gr_row.iter_mut().zip(dg_row) {
                            *gr += hv * d;
                        }
                    }
                }

                // dh_next = d_gates R^T ; grad_x_t = d_gates W^T
                for u in 0..units {
                    let r_row = &r[u * gate_width..(u + 1) * gate_width];
                    let mut acc = 0.0;
                    for (&d, &rv) in dg_row.iter().zip(r_row) {
                        acc += d * rv;
                    }
                    dh_next[b * units + u] = acc;
                }
                let gx_row = (b * t_len + t) * in_dim;
                for k in 0..in_dim {
                    let w_row = &w[k * gate_width..(k + 1) * gate_width];
                    let mut acc = 0.0;
                    for (&d, &wv) in dg_row.iter().zip(w_row) {
                        acc += d * wv;
                    }
                    grad_x[gx_row + k] = acc;
                }
            }
        }

        Ok((
            Tensor::from_parts(vec![batch, t_len, in_dim], grad_x),
            vec![
                Tensor::from_parts(vec![in_dim, gate_width], grad_w),
                Tensor::from_parts(vec![units, gate_width], grad_r),
                Tensor::from_parts(vec![gate_width], grad_b),
            ],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_lstm(in_dim: usize, units: usize, return_sequences: bool) -> LstmLayer {
        LstmLayer {
            input_weights: Tensor::zeros(&[in_dim, 4 * units]),
            recurrent_weights: Tensor::zeros(&[units, 4 * units]),
            bias: Tensor::zeros(&[4 * units]),
            units,
            return_sequences,
        }
    }

    #[test]
    fn zero_parameters_are_a_fixed_point() {
        let l = zero_lstm(3, 4, true);
        let x = Tensor::filled(&[2, 5, 3], 1.7);
        let (y, _) = l.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn return_sequences_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = LstmLayer::init(60, 60, true, &mut rng).unwrap();
        let x = Tensor::zeros(&[2, 56, 60]);
        let (y, _) = l.forward(&x).unwrap();
        assert_eq!(y.shape(), &[2, 56, 60]);
    }

    #[test]
    fn last_step_equals_tail_of_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let full = LstmLayer::init(3, 4, true, &mut rng).unwrap();
        let mut last = full.clone();
        last.return_sequences = false;

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x_data: Vec<f64> = (0..2 * 6 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Tensor::new(vec![2, 6, 3], x_data).unwrap();

        let (seq, _) = full.forward(&x).unwrap();
        let (tail, _) = last.forward(&x).unwrap();
        for b in 0..2 {
            for u in 0..4 {
                assert_eq!(tail.data()[b * 4 + u], seq.data()[(b * 6 + 5) * 4 + u]);
            }
        }
    }

    /// Independent scalar oracle: a one-unit LSTM unrolled by hand.
    #[test]
    fn scalar_oracle_two_steps() {
        let (wi, wf, wg, wo) = (0.4, -0.3, 0.8, 0.2);
        let (ri, rf, rg, ro) = (0.1, 0.5, -0.6, 0.7);
        let (bi, bf, bg, bo) = (0.05, 1.0, -0.1, 0.3);
        let xs = [1.0, 1.0];

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let (mut h, mut c) = (0.0f64, 0.0f64);
        for &x in &xs {
            let i = sig(wi * x + ri * h + bi);
            let f = sig(wf * x + rf * h + bf);
            let g = (wg * x + rg * h + bg).tanh();
            let o = sig(wo * x + ro * h + bo);
            c = f * c + i * g;
            h = o * c.tanh();
        }

        let l = LstmLayer {
            input_weights: Tensor::new(vec![1, 4], vec![wi, wf, wg, wo]).unwrap(),
            recurrent_weights: Tensor::new(vec![1, 4], vec![ri, rf, rg, ro]).unwrap(),
            bias: Tensor::new(vec![4], vec![bi, bf, bg, bo]).unwrap(),
            units: 1,
            return_sequences: false,
        };
        let x = Tensor::new(vec![1, 2, 1], xs.to_vec()).unwrap();
        let (y, _) = l.forward(&x).unwrap();
        assert!(
            (y.data()[0] - h).abs() < 1e-15,
            "lstm {} vs oracle {}",
            y.data()[0],
            h
        );
    }

    #[test]
    fn forget_bias_initialized_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l = LstmLayer::init(5, 3, true, &mut rng).unwrap();
        assert_eq!(&l.bias.data()[3..6], &[1.0, 1.0, 1.0]);
        assert!(l.bias.data()[..3].iter().all(|&v| v == 0.0));
        assert!(l.bias.data()[6..].iter().all(|&v| v == 0.0));
    }
}
