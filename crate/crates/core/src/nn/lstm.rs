//! Single LSTM cell with hand-derived backpropagation through time.
//!
//! Gate equations are the standard formulation: input, forget, and output
//! gates squashed by sigmoid, candidate cell update by tanh:
//!
//! ```text
//! i = sig(W_i x + U_i h + b_i)       f = sig(W_f x + U_f h + b_f)
//! o = sig(W_o x + U_o h + b_o)       g = tanh(W_g x + U_g h + b_g)
//! c' = f * c + i * g                 h' = o * tanh(c')
//! ```

#![allow(clippy::needless_range_loop)]

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::activation::Activation;
use crate::nn::dense::DenseLayer;
use crate::nn::tensor::Tensor;
use crate::scalar::{real, Real};

/// One gate path: input weights `[H, F]`, recurrent weights `[H, H]`, bias `[H]`.
#[derive(Debug, Clone)]
pub struct GatePath<T> {
    pub input_weights: Tensor<T>,
    pub recurrent_weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> GatePath<T> {
    fn init(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng, bias_init: f64) -> Self {
        let w = DenseLayer::<T>::init(input_dim, hidden, Activation::Identity, rng).weights;
        let u = DenseLayer::<T>::init(hidden, hidden, Activation::Identity, rng).weights;
        let mut bias = Tensor::zeros(&[hidden]);
        bias.fill(real(bias_init));
        GatePath {
            input_weights: w,
            recurrent_weights: u,
            bias,
        }
    }

    /// `out = W x + U h + b`
    fn affine(&self, x: &[T], h: &[T], out: &mut [T]) {
        let input_dim = self.input_weights.shape()[1];
        let hidden = self.recurrent_weights.shape()[1];
        for (row, slot) in out.iter_mut().enumerate() {
            let mut acc = self.bias.data()[row];
            let w_row = &self.input_weights.data()[row * input_dim..(row + 1) * input_dim];
            for (w, v) in w_row.iter().zip(x) {
                acc += *w * *v;
            }
            let u_row = &self.recurrent_weights.data()[row * hidden..(row + 1) * hidden];
            for (u, v) in u_row.iter().zip(h) {
                acc += *u * *v;
            }
            *slot = acc;
        }
    }
}

#[derive(Debug, Clone)]
pub struct LstmCell<T> {
    pub input_gate: GatePath<T>,
    pub forget_gate: GatePath<T>,
    pub output_gate: GatePath<T>,
    pub candidate: GatePath<T>,
    hidden: usize,
    input_dim: usize,
}

/// Recurrent state `(h, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Real> LstmState<T> {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![T::zero(); hidden],
            c: vec![T::zero(); hidden],
        }
    }
}

/// Values cached by one forward step, consumed by `backward_step`.
#[derive(Debug, Clone)]
pub struct LstmStepCache<T> {
    pub input: Vec<T>,
    pub h_prev: Vec<T>,
    pub c_prev: Vec<T>,
    pub gate_i: Vec<T>,
    pub gate_f: Vec<T>,
    pub gate_o: Vec<T>,
    pub gate_g: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
}

/// Accumulated parameter gradients for all four gate paths.
#[derive(Debug, Clone)]
pub struct LstmGrads<T> {
    pub input_gate: GateGrads<T>,
    pub forget_gate: GateGrads<T>,
    pub output_gate: GateGrads<T>,
    pub candidate: GateGrads<T>,
}

#[derive(Debug, Clone)]
pub struct GateGrads<T> {
    pub input_weights: Tensor<T>,
    pub recurrent_weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> GateGrads<T> {
    fn zeros_like(path: &GatePath<T>) -> Self {
        GateGrads {
            input_weights: Tensor::zeros_like(&path.input_weights),
            recurrent_weights: Tensor::zeros_like(&path.recurrent_weights),
            bias: Tensor::zeros_like(&path.bias),
        }
    }
}

impl<T: Real> LstmGrads<T> {
    pub fn zeros_like(cell: &LstmCell<T>) -> Self {
        LstmGrads {
            input_gate: GateGrads::zeros_like(&cell.input_gate),
            forget_gate: GateGrads::zeros_like(&cell.forget_gate),
            output_gate: GateGrads::zeros_like(&cell.output_gate),
            candidate: GateGrads::zeros_like(&cell.candidate),
        }
    }
}

impl<T: Real> LstmCell<T> {
    /// Initialize with Glorot-uniform weights. The forget-gate bias starts
    /// at +1 so early training does not erase the cell state.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        LstmCell {
            input_gate: GatePath::init(input_dim, hidden, rng, 0.0),
            forget_gate: GatePath::init(input_dim, hidden, rng, 1.0),
            output_gate: GatePath::init(input_dim, hidden, rng, 0.0),
            candidate: GatePath::init(input_dim, hidden, rng, 0.0),
            hidden,
            input_dim,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Advance the recurrent state by one frame.
    pub fn step(&self, input: &[T], state: &LstmState<T>) -> Result<(LstmState<T>, LstmStepCache<T>)> {
        if input.len() != self.input_dim {
            return Err(Error::usage(format!(
                "lstm expects input of dim {}, got {}",
                self.input_dim,
                input.len()
            )));
        }
        if state.h.len() != self.hidden || state.c.len() != self.hidden {
            return Err(Error::usage(format!(
                "lstm state size mismatch: expected {}, got ({}, {})",
                self.hidden,
                state.h.len(),
                state.c.len()
            )));
        }

        let h = self.hidden;
        let sig = Activation::Sigmoid;
        let mut gate_i = vec![T::zero(); h];
        let mut gate_f = vec![T::zero(); h];
        let mut gate_o = vec![T::zero(); h];
        let mut gate_g = vec![T::zero(); h];
        self.input_gate.affine(input, &state.h, &mut gate_i);
        self.forget_gate.affine(input, &state.h, &mut gate_f);
        self.output_gate.affine(input, &state.h, &mut gate_o);
        self.candidate.affine(input, &state.h, &mut gate_g);
        for k in 0..h {
            gate_i[k] = sig.apply(gate_i[k]);
            gate_f[k] = sig.apply(gate_f[k]);
            gate_o[k] = sig.apply(gate_o[k]);
            gate_g[k] = gate_g[k].tanh();
        }

        let mut c = vec![T::zero(); h];
        let mut tanh_c = vec![T::zero(); h];
        let mut h_next = vec![T::zero(); h];
        for k in 0..h {
            c[k] = gate_f[k] * state.c[k] + gate_i[k] * gate_g[k];
            if !c[k].is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite lstm cell state at unit {k}"
                )));
            }
            tanh_c[k] = c[k].tanh();
            h_next[k] = gate_o[k] * tanh_c[k];
        }

        let cache = LstmStepCache {
            input: input.to_vec(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            gate_i,
            gate_f,
            gate_o,
            gate_g,
            c: c.clone(),
            tanh_c,
        };
        Ok((LstmState { h: h_next, c }, cache))
    }

    /// Backward through one step. `d_h` / `d_c` are the gradients flowing
    /// into this step's outputs; returns `(d_input, d_h_prev, d_c_prev)`.
    pub fn backward_step(
        &self,
        cache: &LstmStepCache<T>,
        d_h: &[T],
        d_c: &[T],
        grads: &mut LstmGrads<T>,
    ) -> (Vec<T>, Vec<T>, Vec<T>) {
        let h = self.hidden;
        let mut di_raw = vec![T::zero(); h];
        let mut df_raw = vec![T::zero(); h];
        let mut do_raw = vec![T::zero(); h];
        let mut dg_raw = vec![T::zero(); h];
        let mut d_c_prev = vec![T::zero(); h];

        for k in 0..h {
            let d_out = d_h[k] * cache.gate_o[k];
            let dc_total = d_c[k] + d_out * (T::one() - cache.tanh_c[k] * cache.tanh_c[k]);
            let d_o = d_h[k] * cache.tanh_c[k];
            do_raw[k] = d_o * cache.gate_o[k] * (T::one() - cache.gate_o[k]);
            df_raw[k] = dc_total * cache.c_prev[k] * cache.gate_f[k] * (T::one() - cache.gate_f[k]);
            di_raw[k] = dc_total * cache.gate_g[k] * cache.gate_i[k] * (T::one() - cache.gate_i[k]);
            dg_raw[k] = dc_total * cache.gate_i[k] * (T::one() - cache.gate_g[k] * cache.gate_g[k]);
            d_c_prev[k] = dc_total * cache.gate_f[k];
        }

        let mut d_input = vec![T::zero(); self.input_dim];
        let mut d_h_prev = vec![T::zero(); h];
        let paths = [
            (&self.input_gate, &mut grads.input_gate, &di_raw),
            (&self.forget_gate, &mut grads.forget_gate, &df_raw),
            (&self.output_gate, &mut grads.output_gate, &do_raw),
            (&self.candidate, &mut grads.candidate, &dg_raw),
        ];
        for (path, grad, d_raw) in paths {
            for row in 0..h {
                let dz = d_raw[row];
                grad.bias.data_mut()[row] += dz;
                let w_row = &path.input_weights.data()[row * self.input_dim..(row + 1) * self.input_dim];
                let gw_row =
                    &mut grad.input_weights.data_mut()[row * self.input_dim..(row + 1) * self.input_dim];
                for col in 0..self.input_dim {
                    gw_row[col] += dz * cache.input[col];
                    d_input[col] += dz * w_row[col];
                }
                let u_row = &path.recurrent_weights.data()[row * h..(row + 1) * h];
                let gu_row = &mut grad.recurrent_weights.data_mut()[row * h..(row + 1) * h];
                for col in 0..h {
                    gu_row[col] += dz * cache.h_prev[col];
                    d_h_prev[col] += dz * u_row[col];
                }
            }
        }
        (d_input, d_h_prev, d_c_prev)
    }
}

/// Free-function form of the step, matching the rest of the op surface.
pub fn lstm_step<T: Real>(
    cell: &LstmCell<T>,
    input: &[T],
    state: &LstmState<T>,
) -> Result<(LstmState<T>, LstmStepCache<T>)> {
    cell.step(input, state)
}
