//! Completeness regressor: feature encoder -> LSTM -> two fully connected
//! layers -> single output neuron (rtanh by default) -> causal smoothing.
//!
//! The same per-frame step drives batch evaluation, training, and the
//! streaming estimator, so online and offline outputs agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::activation::Activation;
use crate::nn::adam::{AdamState, ParamGrad};
use crate::nn::dense::{DenseCache, DenseGrads, DenseLayer};
use crate::nn::dropout::{apply_mask, dropout_mask};
use crate::nn::lstm::{LstmCell, LstmGrads, LstmState, LstmStepCache};
use crate::nn::smooth::{gaussian_smooth, gaussian_smooth_backward};
use crate::nn::tensor::Tensor;
use crate::scalar::{real, Real};
use crate::trace::ProcessTrace;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressorConfig<T> {
    pub feature_dim: usize,
    /// Widths of the dense encoder layers (one or two).
    pub encoder_dims: Vec<usize>,
    pub lstm_hidden: usize,
    pub fc1_dim: usize,
    pub fc2_dim: usize,
    pub output_activation: Activation,
    pub smooth_sigma: T,
    pub smooth_radius: usize,
}

impl<T: Real> RegressorConfig<T> {
    pub fn new(feature_dim: usize) -> Self {
        RegressorConfig {
            feature_dim,
            encoder_dims: vec![32],
            lstm_hidden: 32,
            fc1_dim: 32,
            fc2_dim: 32,
            output_activation: Activation::Rtanh,
            smooth_sigma: real(2.5),
            smooth_radius: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::usage("feature_dim must be >= 1"));
        }
        if self.encoder_dims.is_empty() || self.encoder_dims.len() > 2 {
            return Err(Error::usage(format!(
                "encoder takes 1 or 2 layers, got {}",
                self.encoder_dims.len()
            )));
        }
        if self.encoder_dims.contains(&0)
            || self.lstm_hidden == 0
            || self.fc1_dim == 0
            || self.fc2_dim == 0
        {
            return Err(Error::usage("layer widths must be >= 1"));
        }
        match self.output_activation {
            Activation::Rtanh | Activation::Sigmoid => {}
            other => {
                return Err(Error::usage(format!(
                    "output activation must be rtanh or sigmoid, got {other}"
                )))
            }
        }
        if self.smooth_sigma <= T::zero() {
            return Err(Error::usage("smooth_sigma must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ProgressRegressor<T> {
    config: RegressorConfig<T>,
    pub encoder: Vec<DenseLayer<T>>,
    pub lstm: LstmCell<T>,
    pub fc1: DenseLayer<T>,
    pub fc2: DenseLayer<T>,
    /// Output neuron: one unit, rtanh or sigmoid.
    pub out: DenseLayer<T>,
}

/// One dense layer's forward record inside a training pass.
#[derive(Debug, Clone)]
struct LayerPass<T> {
    input: Vec<T>,
    cache: DenseCache<T>,
    /// Keep-mask applied to the layer output (training only).
    mask: Option<Vec<bool>>,
}

/// Per-frame forward records for backpropagation through time.
#[derive(Debug, Clone)]
struct FrameCache<T> {
    encoder: Vec<LayerPass<T>>,
    lstm: LstmStepCache<T>,
    fc1: LayerPass<T>,
    fc2: LayerPass<T>,
    out: LayerPass<T>,
}

/// Forward pass over a trace with everything the backward pass needs.
pub struct TrainForward<T> {
    frames: Vec<FrameCache<T>>,
    dropout_rate: T,
    /// Raw per-frame outputs, before smoothing.
    pub raw: Vec<T>,
    /// Smoothed per-frame completeness estimates.
    pub smoothed: Vec<T>,
}

/// Gradients for every parameter tensor of the regressor.
#[derive(Debug, Clone)]
pub struct RegressorGradients<T> {
    pub encoder: Vec<DenseGrads<T>>,
    pub lstm: LstmGrads<T>,
    pub fc1: DenseGrads<T>,
    pub fc2: DenseGrads<T>,
    pub out: DenseGrads<T>,
}

impl<T: Real> RegressorGradients<T> {
    pub fn zeros_like(model: &ProgressRegressor<T>) -> Self {
        RegressorGradients {
            encoder: model.encoder.iter().map(DenseGrads::zeros_like).collect(),
            lstm: LstmGrads::zeros_like(&model.lstm),
            fc1: DenseGrads::zeros_like(&model.fc1),
            fc2: DenseGrads::zeros_like(&model.fc2),
            out: DenseGrads::zeros_like(&model.out),
        }
    }
}

impl<T: Real> ProgressRegressor<T> {
    pub fn init(config: RegressorConfig<T>, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut encoder = Vec::with_capacity(config.encoder_dims.len());
        let mut in_dim = config.feature_dim;
        for &width in &config.encoder_dims {
            encoder.push(DenseLayer::init(in_dim, width, Activation::Relu, &mut rng));
            in_dim = width;
        }
        let lstm = LstmCell::init(in_dim, config.lstm_hidden, &mut rng);
        let fc1 = DenseLayer::init(config.lstm_hidden, config.fc1_dim, Activation::Relu, &mut rng);
        let fc2 = DenseLayer::init(config.fc1_dim, config.fc2_dim, Activation::Relu, &mut rng);
        let mut out = DenseLayer::init(config.fc2_dim, 1, config.output_activation, &mut rng);
        // A negative initial preactivation would park rtanh on its
        // zero-gradient floor and the network could never train; start the
        // output neuron mid-range instead.
        out.bias.fill(real(0.5));
        Ok(ProgressRegressor {
            config,
            encoder,
            lstm,
            fc1,
            fc2,
            out,
        })
    }

    pub fn config(&self) -> &RegressorConfig<T> {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    pub fn smooth_sigma(&self) -> T {
        self.config.smooth_sigma
    }

    pub fn smooth_radius(&self) -> usize {
        self.config.smooth_radius
    }

    pub fn output_activation(&self) -> Activation {
        self.config.output_activation
    }

    /// Swap the output neuron's activation in place (used by the
    /// activation comparison harness, which clones one initialization).
    pub fn set_output_activation(&mut self, activation: Activation) -> Result<()> {
        match activation {
            Activation::Rtanh | Activation::Sigmoid => {
                self.config.output_activation = activation;
                self.out.activation = activation;
                Ok(())
            }
            other => Err(Error::usage(format!(
                "output activation must be rtanh or sigmoid, got {other}"
            ))),
        }
    }

    pub fn zero_lstm_state(&self) -> LstmState<T> {
        LstmState::zeros(self.config.lstm_hidden)
    }

    /// Advance the recurrent state by one frame and return the raw
    /// (pre-smoothing) output. Shared by batch and streaming paths.
    pub fn step_frame(&self, state: &mut LstmState<T>, features: &[T]) -> Result<T> {
        if features.len() != self.config.feature_dim {
            return Err(Error::usage(format!(
                "model expects {} features, got {}",
                self.config.feature_dim,
                features.len()
            )));
        }
        let mut x = features.to_vec();
        for layer in &self.encoder {
            x = layer.forward(&x)?;
        }
        let (next, _) = self.lstm.step(&x, state)?;
        *state = next;
        let a = self.fc1.forward(&state.h)?;
        let b = self.fc2.forward(&a)?;
        Ok(self.out.forward(&b)?[0])
    }

    /// Evaluation-mode estimates for a whole trace: one completeness value
    /// per frame, recurrent state threaded across the trace, causal
    /// smoothing applied at the end.
    pub fn forward(&self, trace: &ProcessTrace<T>) -> Result<Vec<T>> {
        let mut state = self.zero_lstm_state();
        let mut raw = Vec::with_capacity(trace.num_frames());
        for frame in &trace.frames {
            raw.push(self.step_frame(&mut state, &frame.features)?);
        }
        gaussian_smooth(&raw, self.config.smooth_sigma, self.config.smooth_radius)
    }

    /// Training-mode forward pass with caches and optional dropout.
    /// Dropout masks are drawn deterministically from `dropout_seed`.
    pub fn forward_train(
        &self,
        features: &[Vec<T>],
        dropout_rate: T,
        dropout_seed: u64,
    ) -> Result<TrainForward<T>> {
        if dropout_rate < T::zero() || dropout_rate >= T::one() {
            return Err(Error::usage(format!("dropout rate must be in [0, 1), got {dropout_rate}")));
        }
        let use_dropout = dropout_rate > T::zero();
        let mut mask_seed = ChaCha8Rng::seed_from_u64(dropout_seed);
        let mut draw_mask = |len: usize| -> Result<Option<Vec<bool>>> {
            if use_dropout {
                use rand::Rng;
                let site: u64 = mask_seed.random();
                Ok(Some(dropout_mask(len, dropout_rate, site)?))
            } else {
                Ok(None)
            }
        };

        let mut state = self.zero_lstm_state();
        let mut frames = Vec::with_capacity(features.len());
        let mut raw = Vec::with_capacity(features.len());
        for feats in features {
            if feats.len() != self.config.feature_dim {
                return Err(Error::usage(format!(
                    "model expects {} features, got {}",
                    self.config.feature_dim,
                    feats.len()
                )));
            }
            let mut x = feats.clone();
            let mut encoder_passes = Vec::with_capacity(self.encoder.len());
            for layer in &self.encoder {
                let cache = layer.forward_cached(&x)?;
                let mut output = cache.output.clone();
                let mask = draw_mask(output.len())?;
                if let Some(mask) = &mask {
                    apply_mask(&mut output, mask, dropout_rate);
                }
                encoder_passes.push(LayerPass {
                    input: x,
                    cache,
                    mask,
                });
                x = output;
            }

            let (next, lstm_cache) = self.lstm.step(&x, &state)?;
            state = next;
            let hidden = state.h.clone();

            let fc1_cache = self.fc1.forward_cached(&hidden)?;
            let mut fc1_out = fc1_cache.output.clone();
            let fc1_mask = draw_mask(fc1_out.len())?;
            if let Some(mask) = &fc1_mask {
                apply_mask(&mut fc1_out, mask, dropout_rate);
            }

            let fc2_cache = self.fc2.forward_cached(&fc1_out)?;
            let mut fc2_out = fc2_cache.output.clone();
            let fc2_mask = draw_mask(fc2_out.len())?;
            if let Some(mask) = &fc2_mask {
                apply_mask(&mut fc2_out, mask, dropout_rate);
            }

            let out_cache = self.out.forward_cached(&fc2_out)?;
            raw.push(out_cache.output[0]);

            frames.push(FrameCache {
                encoder: encoder_passes,
                lstm: lstm_cache,
                fc1: LayerPass {
                    input: hidden,
                    cache: fc1_cache,
                    mask: fc1_mask,
                },
                fc2: LayerPass {
                    input: fc1_out,
                    cache: fc2_cache,
                    mask: fc2_mask,
                },
                out: LayerPass {
                    input: fc2_out,
                    cache: out_cache,
                    mask: None,
                },
            });
        }
        let smoothed = gaussian_smooth(&raw, self.config.smooth_sigma, self.config.smooth_radius)?;
        Ok(TrainForward {
            frames,
            dropout_rate,
            raw,
            smoothed,
        })
    }

    /// Backpropagate a gradient w.r.t. the smoothed outputs through the
    /// smoother, output neuron, dense layers, and the LSTM through time.
    /// `window` truncates how far gradients flow back through the
    /// recurrent state (`None` = the whole trace).
    pub fn backward(
        &self,
        pass: &TrainForward<T>,
        d_smoothed: &[T],
        window: Option<usize>,
    ) -> Result<RegressorGradients<T>> {
        let n = pass.frames.len();
        if d_smoothed.len() != n {
            return Err(Error::usage(format!(
                "gradient length {} does not match {} frames",
                d_smoothed.len(),
                n
            )));
        }
        let d_raw = gaussian_smooth_backward(
            d_smoothed,
            self.config.smooth_sigma,
            self.config.smooth_radius,
        )?;

        let mut grads = RegressorGradients::zeros_like(self);
        let hidden = self.config.lstm_hidden;
        let mut d_h_carry = vec![T::zero(); hidden];
        let mut d_c_carry = vec![T::zero(); hidden];
        let keep = T::one() - pass.dropout_rate;

        for t in (0..n).rev() {
            let frame = &pass.frames[t];

            // Output neuron.
            let d_out = vec![d_raw[t]];
            let mut d_fc2_out =
                self.out
                    .backward(&frame.out.input, &frame.out.cache, &d_out, &mut grads.out);
            if let Some(mask) = &frame.fc2.mask {
                unmask(&mut d_fc2_out, mask, keep);
            }

            let mut d_fc1_out =
                self.fc2
                    .backward(&frame.fc2.input, &frame.fc2.cache, &d_fc2_out, &mut grads.fc2);
            if let Some(mask) = &frame.fc1.mask {
                unmask(&mut d_fc1_out, mask, keep);
            }

            let mut d_h =
                self.fc1
                    .backward(&frame.fc1.input, &frame.fc1.cache, &d_fc1_out, &mut grads.fc1);
            for (dh, carry) in d_h.iter_mut().zip(&d_h_carry) {
                *dh += *carry;
            }

            let (mut d_x, d_h_prev, d_c_prev) =
                self.lstm
                    .backward_step(&frame.lstm, &d_h, &d_c_carry, &mut grads.lstm);

            // Encoder layers, last to first.
            for (layer, layer_pass, layer_grads) in self
                .encoder
                .iter()
                .zip(&frame.encoder)
                .zip(&mut grads.encoder)
                .map(|((l, p), g)| (l, p, g))
                .rev()
            {
                if let Some(mask) = &layer_pass.mask {
                    unmask(&mut d_x, mask, keep);
                }
                d_x = layer.backward(&layer_pass.input, &layer_pass.cache, &d_x, layer_grads);
            }

            // Truncate the recurrent gradient at window boundaries.
            let truncate = match window {
                Some(w) if w > 0 => t % w == 0,
                _ => false,
            };
            if truncate {
                d_h_carry = vec![T::zero(); hidden];
                d_c_carry = vec![T::zero(); hidden];
            } else {
                d_h_carry = d_h_prev;
                d_c_carry = d_c_prev;
            }
        }
        Ok(grads)
    }

    /// Apply one optimizer step. The block order is stable, so one
    /// [`AdamState`] can track the model across calls.
    pub fn adam_step(&mut self, grads: &RegressorGradients<T>, state: &mut AdamState<T>) -> Result<()> {
        let mut blocks = Vec::new();
        for (i, (layer, grad)) in self.encoder.iter_mut().zip(&grads.encoder).enumerate() {
            blocks.push(ParamGrad {
                name: format!("encoder.{i}.weights"),
                param: &mut layer.weights,
                grad: &grad.weights,
            });
            blocks.push(ParamGrad {
                name: format!("encoder.{i}.bias"),
                param: &mut layer.bias,
                grad: &grad.bias,
            });
        }
        let gate_names = ["input_gate", "forget_gate", "output_gate", "candidate"];
        let gates = [
            (&mut self.lstm.input_gate, &grads.lstm.input_gate),
            (&mut self.lstm.forget_gate, &grads.lstm.forget_gate),
            (&mut self.lstm.output_gate, &grads.lstm.output_gate),
            (&mut self.lstm.candidate, &grads.lstm.candidate),
        ];
        for ((path, grad), name) in gates.into_iter().zip(gate_names) {
            blocks.push(ParamGrad {
                name: format!("lstm.{name}.input_weights"),
                param: &mut path.input_weights,
                grad: &grad.input_weights,
            });
            blocks.push(ParamGrad {
                name: format!("lstm.{name}.recurrent_weights"),
                param: &mut path.recurrent_weights,
                grad: &grad.recurrent_weights,
            });
            blocks.push(ParamGrad {
                name: format!("lstm.{name}.bias"),
                param: &mut path.bias,
                grad: &grad.bias,
            });
        }
        for (name, layer, grad) in [
            ("fc1", &mut self.fc1, &grads.fc1),
            ("fc2", &mut self.fc2, &grads.fc2),
            ("out", &mut self.out, &grads.out),
        ] {
            blocks.push(ParamGrad {
                name: format!("{name}.weights"),
                param: &mut layer.weights,
                grad: &grad.weights,
            });
            blocks.push(ParamGrad {
                name: format!("{name}.bias"),
                param: &mut layer.bias,
                grad: &grad.bias,
            });
        }
        state.update(blocks)
    }

    /// All parameter tensors with stable names, for persistence and tests.
    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut params = Vec::new();
        for (i, layer) in self.encoder.iter().enumerate() {
            params.push((format!("encoder.{i}.weights"), &layer.weights));
            params.push((format!("encoder.{i}.bias"), &layer.bias));
        }
        let gates = [
            ("input_gate", &self.lstm.input_gate),
            ("forget_gate", &self.lstm.forget_gate),
            ("output_gate", &self.lstm.output_gate),
            ("candidate", &self.lstm.candidate),
        ];
        for (name, path) in gates {
            params.push((format!("lstm.{name}.input_weights"), &path.input_weights));
            params.push((format!("lstm.{name}.recurrent_weights"), &path.recurrent_weights));
            params.push((format!("lstm.{name}.bias"), &path.bias));
        }
        for (name, layer) in [("fc1", &self.fc1), ("fc2", &self.fc2), ("out", &self.out)] {
            params.push((format!("{name}.weights"), &layer.weights));
            params.push((format!("{name}.bias"), &layer.bias));
        }
        params
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut params = Vec::new();
        for (i, layer) in self.encoder.iter_mut().enumerate() {
            params.push((format!("encoder.{i}.weights"), &mut layer.weights));
            params.push((format!("encoder.{i}.bias"), &mut layer.bias));
        }
        let gates = [
            ("input_gate", &mut self.lstm.input_gate),
            ("forget_gate", &mut self.lstm.forget_gate),
            ("output_gate", &mut self.lstm.output_gate),
            ("candidate", &mut self.lstm.candidate),
        ];
        for (name, path) in gates {
            params.push((format!("lstm.{name}.input_weights"), &mut path.input_weights));
            params.push((
                format!("lstm.{name}.recurrent_weights"),
                &mut path.recurrent_weights,
            ));
            params.push((format!("lstm.{name}.bias"), &mut path.bias));
        }
        for (name, layer) in [
            ("fc1", &mut self.fc1),
            ("fc2", &mut self.fc2),
            ("out", &mut self.out),
        ] {
            params.push((format!("{name}.weights"), &mut layer.weights));
            params.push((format!("{name}.bias"), &mut layer.bias));
        }
        params
    }

    /// Boundary check over all parameters.
    pub fn validate_finite(&self) -> Result<()> {
        for (name, tensor) in self.named_params() {
            tensor.validate_finite(&name)?;
        }
        Ok(())
    }
}

#[inline]
fn unmask<T: Real>(grad: &mut [T], mask: &[bool], keep: T) {
    for (g, &m) in grad.iter_mut().zip(mask) {
        *g = if m { *g / keep } else { T::zero() };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimulatorConfig;
    use crate::trace::{FeatureFrame, PhaseSchema};

    fn tiny_config() -> RegressorConfig<f64> {
        RegressorConfig {
            feature_dim: 3,
            encoder_dims: vec![4],
            lstm_hidden: 4,
            fc1_dim: 4,
            fc2_dim: 4,
            output_activation: Activation::Rtanh,
            smooth_sigma: 1.0,
            smooth_radius: 2,
        }
    }

    fn tiny_trace() -> ProcessTrace<f64> {
        let schema = PhaseSchema::new(vec!["a".into(), "b".into()]).unwrap();
        let frames = (0..6)
            .map(|i| FeatureFrame {
                timestamp: i as f64,
                features: vec![0.2 * i as f64, -0.1, 0.5],
            })
            .collect();
        ProcessTrace::new("t".into(), schema, frames, vec![(0, 0), (1, 3)], 6.0).unwrap()
    }

    #[test]
    fn zero_parameters_emit_zero_estimates() {
        let mut model = ProgressRegressor::init(tiny_config(), 1).unwrap();
        for (_, tensor) in model.named_params_mut() {
            tensor.fill(0.0);
        }
        let out = model.forward(&tiny_trace()).unwrap();
        assert!(out.iter().all(|&v| v == 0.0), "rtanh(0) must stay 0: {out:?}");
    }

    #[test]
    fn radius_zero_smoothing_is_identity() {
        let mut config = tiny_config();
        config.smooth_radius = 0;
        let model = ProgressRegressor::init(config, 2).unwrap();
        let trace = tiny_trace();
        let smoothed = model.forward(&trace).unwrap();
        let mut state = model.zero_lstm_state();
        let raw: Vec<f64> = trace
            .frames
            .iter()
            .map(|f| model.step_frame(&mut state, &f.features).unwrap())
            .collect();
        assert_eq!(smoothed, raw);
    }

    #[test]
    fn feature_dim_mismatch_is_usage_error() {
        let model = ProgressRegressor::init(tiny_config(), 3).unwrap();
        let mut state = model.zero_lstm_state();
        assert!(model.step_frame(&mut state, &[0.0; 2]).is_err());
    }

    #[test]
    fn outputs_stay_in_unit_interval_on_simulated_data() {
        let model = ProgressRegressor::init(RegressorConfig::new(4), 5).unwrap();
        let traces =
            crate::sim::generate_dataset(&SimulatorConfig::<f64>::new(3, 3, 4, 4)).unwrap();
        for trace in &traces {
            for v in model.forward(trace).unwrap() {
                assert!((0.0..1.0).contains(&v));
            }
        }
    }

    /// Keep the ReLU stack and the output neuron in their active regions
    /// so gradient checks exercise non-trivial paths.
    fn activate(model: &mut ProgressRegressor<f64>) {
        for layer in &mut model.encoder {
            layer.bias.fill(0.2);
        }
        model.fc1.bias.fill(0.2);
        model.fc2.bias.fill(0.2);
        model.out.bias.fill(0.4);
    }

    /// Full-pass gradient check: loss = sum(c_i * smoothed_i) so the
    /// backward path through smoothing, output neuron, dense stack, and
    /// BPTT is exercised against central finite differences.
    #[test]
    #[allow(clippy::needless_range_loop)]
    fn backward_matches_finite_differences() {
        let mut model = ProgressRegressor::init(tiny_config(), 7).unwrap();
        activate(&mut model);
        let model = model;
        let trace = tiny_trace();
        let features: Vec<Vec<f64>> = trace.frames.iter().map(|f| f.features.clone()).collect();
        let coeffs: Vec<f64> = (0..features.len()).map(|i| 0.3 + 0.1 * i as f64).collect();

        let pass = model.forward_train(&features, 0.0, 0).unwrap();
        let grads = model.backward(&pass, &coeffs, None).unwrap();

        let objective = |m: &ProgressRegressor<f64>| -> f64 {
            let pass = m.forward_train(&features, 0.0, 0).unwrap();
            pass.smoothed.iter().zip(&coeffs).map(|(y, c)| y * c).sum()
        };

        let h = 1e-5;
        let analytic: Vec<(String, Vec<f64>)> = {
            let named = [
                ("encoder.0.weights", grads.encoder[0].weights.data().to_vec()),
                ("lstm.forget_gate.recurrent_weights", grads.lstm.forget_gate.recurrent_weights.data().to_vec()),
                ("lstm.candidate.input_weights", grads.lstm.candidate.input_weights.data().to_vec()),
                ("fc1.weights", grads.fc1.weights.data().to_vec()),
                ("fc2.bias", grads.fc2.bias.data().to_vec()),
                ("out.weights", grads.out.weights.data().to_vec()),
                ("out.bias", grads.out.bias.data().to_vec()),
            ];
            named.into_iter().map(|(n, g)| (n.to_string(), g)).collect()
        };

        for (name, analytic_grad) in analytic {
            for idx in 0..analytic_grad.len() {
                let mut plus = model.clone();
                let mut minus = model.clone();
                for (n, t) in plus.named_params_mut() {
                    if n == name {
                        t.data_mut()[idx] += h;
                    }
                }
                for (n, t) in minus.named_params_mut() {
                    if n == name {
                        t.data_mut()[idx] -= h;
                    }
                }
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                let a = analytic_grad[idx];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1.0);
                assert!(rel < 1e-6, "{name}[{idx}]: analytic {a} vs fd {fd}");
            }
        }
    }

    #[test]
    fn window_covering_the_trace_equals_full_backprop() {
        let mut model = ProgressRegressor::init(tiny_config(), 9).unwrap();
        activate(&mut model);
        let trace = tiny_trace();
        let features: Vec<Vec<f64>> = trace.frames.iter().map(|f| f.features.clone()).collect();
        let d: Vec<f64> = (0..features.len()).map(|i| 0.5 - 0.1 * i as f64).collect();
        let pass = model.forward_train(&features, 0.0, 0).unwrap();
        let full = model.backward(&pass, &d, None).unwrap();
        let wide = model.backward(&pass, &d, Some(features.len())).unwrap();
        let narrow = model.backward(&pass, &d, Some(1)).unwrap();
        assert_eq!(
            full.lstm.candidate.recurrent_weights.data(),
            wide.lstm.candidate.recurrent_weights.data()
        );
        // A one-frame window cuts all recurrent gradient flow.
        assert_ne!(
            full.lstm.candidate.recurrent_weights.data(),
            narrow.lstm.candidate.recurrent_weights.data()
        );
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn two_layer_encoder_gradients_match_finite_differences() {
        let config = RegressorConfig {
            encoder_dims: vec![5, 4],
            ..tiny_config()
        };
        let mut model = ProgressRegressor::init(config, 13).unwrap();
        activate(&mut model);
        let model = model;
        let trace = tiny_trace();
        let features: Vec<Vec<f64>> = trace.frames.iter().map(|f| f.features.clone()).collect();
        let coeffs: Vec<f64> = (0..features.len()).map(|i| 0.4 + 0.05 * i as f64).collect();

        let pass = model.forward_train(&features, 0.0, 0).unwrap();
        let grads = model.backward(&pass, &coeffs, None).unwrap();
        let objective = |m: &ProgressRegressor<f64>| -> f64 {
            let pass = m.forward_train(&features, 0.0, 0).unwrap();
            pass.smoothed.iter().zip(&coeffs).map(|(y, c)| y * c).sum()
        };
        let h = 1e-5;
        for (name, analytic) in [
            ("encoder.0.weights", grads.encoder[0].weights.data()),
            ("encoder.1.weights", grads.encoder[1].weights.data()),
            ("encoder.1.bias", grads.encoder[1].bias.data()),
        ] {
            for idx in 0..analytic.len() {
                let mut plus = model.clone();
                for (n, t) in plus.named_params_mut() {
                    if n == name {
                        t.data_mut()[idx] += h;
                    }
                }
                let mut minus = model.clone();
                for (n, t) in minus.named_params_mut() {
                    if n == name {
                        t.data_mut()[idx] -= h;
                    }
                }
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                let a = analytic[idx];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1.0);
                assert!(rel < 1e-6, "{name}[{idx}]: analytic {a} vs fd {fd}");
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn dropout_gradients_match_finite_differences_for_fixed_masks() {
        let mut model = ProgressRegressor::init(tiny_config(), 21).unwrap();
        activate(&mut model);
        let model = model;
        let trace = tiny_trace();
        let features: Vec<Vec<f64>> = trace.frames.iter().map(|f| f.features.clone()).collect();
        let coeffs: Vec<f64> = (0..features.len()).map(|i| 0.3 + 0.1 * i as f64).collect();
        let (rate, seed) = (0.3, 77);

        let pass = model.forward_train(&features, rate, seed).unwrap();
        let grads = model.backward(&pass, &coeffs, None).unwrap();
        // The seed pins the masks, so the dropped network is an ordinary
        // deterministic function of the parameters.
        let objective = |m: &ProgressRegressor<f64>| -> f64 {
            let pass = m.forward_train(&features, rate, seed).unwrap();
            pass.smoothed.iter().zip(&coeffs).map(|(y, c)| y * c).sum()
        };
        let h = 1e-5;
        for (name, analytic) in [
            ("encoder.0.weights", grads.encoder[0].weights.data()),
            ("fc1.weights", grads.fc1.weights.data()),
            ("fc2.weights", grads.fc2.weights.data()),
            ("out.weights", grads.out.weights.data()),
        ] {
            for idx in 0..analytic.len() {
                let mut plus = model.clone();
                for (n, t) in plus.named_params_mut() {
                    if n == name {
                        t.data_mut()[idx] += h;
                    }
                }
                let mut minus = model.clone();
                for (n, t) in minus.named_params_mut() {
                    if n == name {
                        t.data_mut()[idx] -= h;
                    }
                }
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                let a = analytic[idx];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1.0);
                assert!(rel < 1e-6, "{name}[{idx}]: analytic {a} vs fd {fd}");
            }
        }
    }

    #[test]
    fn dropout_training_pass_is_deterministic_per_seed() {
        let mut model = ProgressRegressor::init(tiny_config(), 7).unwrap();
        activate(&mut model);
        let model = model;
        let trace = tiny_trace();
        let features: Vec<Vec<f64>> = trace.frames.iter().map(|f| f.features.clone()).collect();
        let a = model.forward_train(&features, 0.3, 42).unwrap();
        let b = model.forward_train(&features, 0.3, 42).unwrap();
        let c = model.forward_train(&features, 0.3, 43).unwrap();
        assert_eq!(a.raw, b.raw);
        assert_ne!(a.raw, c.raw);
    }
}
