//! Adam optimizer with bias correction and per-step learning-rate decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamConfig<T> {
    pub learning_rate: T,
    /// Multiplicative decay: the effective rate at step `t` is
    /// `learning_rate / (1 + decay * t)`.
    pub decay: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Real> Default for AdamConfig<T> {
    fn default() -> Self {
        AdamConfig {
            learning_rate: real(0.001),
            decay: real(1e-8),
            beta1: real(0.9),
            beta2: real(0.999),
            epsilon: real(1e-8),
        }
    }
}

/// First/second moment accumulators, one pair per parameter block.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig<T>,
    pub step: u64,
    moments: Vec<(Tensor<T>, Tensor<T>)>,
}

/// One named parameter block with its gradient.
pub struct ParamGrad<'a, T> {
    pub name: String,
    pub param: &'a mut Tensor<T>,
    pub grad: &'a Tensor<T>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig<T>) -> Self {
        AdamState {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    /// Apply one update across all parameter blocks. Blocks must be passed
    /// in the same order on every call.
    pub fn update(&mut self, mut blocks: Vec<ParamGrad<'_, T>>) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = blocks
                .iter()
                .map(|b| (Tensor::zeros_like(b.param), Tensor::zeros_like(b.param)))
                .collect();
        }
        if self.moments.len() != blocks.len() {
            return Err(Error::usage(format!(
                "adam state tracks {} blocks, got {}",
                self.moments.len(),
                blocks.len()
            )));
        }

        self.step += 1;
        let t = self.step;
        let cfg = &self.config;
        let step_t = real::<T>(t as f64);
        let lr_t = cfg.learning_rate / (T::one() + cfg.decay * step_t);
        let bias1 = T::one() - cfg.beta1.powi(t as i32);
        let bias2 = T::one() - cfg.beta2.powi(t as i32);

        for (block, (m, v)) in blocks.iter_mut().zip(self.moments.iter_mut()) {
            if block.grad.len() != block.param.len() {
                return Err(Error::usage(format!(
                    "gradient shape mismatch for parameter block {}",
                    block.name
                )));
            }
            let m_data = m.data_mut();
            let v_data = v.data_mut();
            let p_data = block.param.data_mut();
            for (i, &g) in block.grad.data().iter().enumerate() {
                if !g.is_finite() {
                    return Err(Error::numeric(format!(
                        "non-finite gradient in parameter block {}",
                        block.name
                    )));
                }
                m_data[i] = cfg.beta1 * m_data[i] + (T::one() - cfg.beta1) * g;
                v_data[i] = cfg.beta2 * v_data[i] + (T::one() - cfg.beta2) * g * g;
                let m_hat = m_data[i] / bias1;
                let v_hat = v_data[i] / bias2;
                p_data[i] -= lr_t * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
        Ok(())
    }
}

/// Single-block convenience form.
pub fn adam_update<T: Real>(
    param: &mut Tensor<T>,
    grad: &Tensor<T>,
    state: &mut AdamState<T>,
) -> Result<()> {
    state.update(vec![ParamGrad {
        name: "param".to_string(),
        param,
        grad,
    }])
}
