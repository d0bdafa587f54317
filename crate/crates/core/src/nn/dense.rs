//! Fully connected layer with hand-derived gradients.

#![allow(clippy::needless_range_loop)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::activation::Activation;
use crate::nn::tensor::Tensor;
use crate::scalar::{real, Real};

/// `y = f(W x + b)` with `W: [out, in]`, `b: [out]`.
#[derive(Debug, Clone)]
pub struct DenseLayer<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub activation: Activation,
}

/// Per-call forward cache needed by the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    pub preact: Vec<T>,
    pub output: Vec<T>,
}

/// Parameter gradients for one layer.
#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> DenseLayer<T> {
    /// Glorot-uniform weights from the caller's RNG. Biases get a small
    /// jitter so preactivations never start exactly on an activation kink.
    pub fn init(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data = (0..in_dim * out_dim)
            .map(|_| real::<T>(rng.random_range(-limit..limit)))
            .collect();
        let bias = (0..out_dim)
            .map(|_| real::<T>(rng.random_range(-0.05..0.05)))
            .collect();
        DenseLayer {
            weights: Tensor::from_vec(&[out_dim, in_dim], data).expect("init shape"),
            bias: Tensor::from_vec(&[out_dim], bias).expect("init shape"),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(input)?.output)
    }

    pub fn forward_cached(&self, input: &[T]) -> Result<DenseCache<T>> {
        if input.len() != self.in_dim() {
            return Err(Error::usage(format!(
                "dense layer expects input of dim {}, got {}",
                self.in_dim(),
                input.len()
            )));
        }
        let out = self.out_dim();
        let mut preact = vec![T::zero(); out];
        for (row, pre) in preact.iter_mut().enumerate() {
            let mut acc = self.bias.data()[row];
            let w_row = &self.weights.data()[row * self.in_dim()..(row + 1) * self.in_dim()];
            for (w, x) in w_row.iter().zip(input) {
                acc += *w * *x;
            }
            *pre = acc;
        }
        let output = preact.iter().map(|&z| self.activation.apply(z)).collect();
        Ok(DenseCache { preact, output })
    }

    /// Backpropagate `d_output` (gradient w.r.t. the layer output),
    /// accumulating parameter gradients and returning the input gradient.
    pub fn backward(
        &self,
        input: &[T],
        cache: &DenseCache<T>,
        d_output: &[T],
        grads: &mut DenseGrads<T>,
    ) -> Vec<T> {
        let in_dim = self.in_dim();
        let mut d_input = vec![T::zero(); in_dim];
        for row in 0..self.out_dim() {
            let dz = d_output[row] * self.activation.grad(cache.preact[row]);
            grads.bias.data_mut()[row] += dz;
            let w_row = &self.weights.data()[row * in_dim..(row + 1) * in_dim];
            let gw_row = &mut grads.weights.data_mut()[row * in_dim..(row + 1) * in_dim];
            for col in 0..in_dim {
                gw_row[col] += dz * input[col];
                d_input[col] += dz * w_row[col];
            }
        }
        d_input
    }
}

impl<T: Real> DenseGrads<T> {
    pub fn zeros_like(layer: &DenseLayer<T>) -> Self {
        DenseGrads {
            weights: Tensor::zeros_like(&layer.weights),
            bias: Tensor::zeros_like(&layer.bias),
        }
    }
}
