//! Minimal from-scratch differentiable stack: tensors, dense layers, an
//! LSTM cell, dropout, the rtanh/sigmoid output activations, MAE loss,
//! causal Gaussian smoothing, and the Adam optimizer.
//!
//! Gradients are hand-derived per layer; there is no autodiff graph.

pub mod activation;
pub mod adam;
pub mod dense;
pub mod dropout;
pub mod loss;
pub mod lstm;
pub mod smooth;
pub mod tensor;

pub use activation::{rtanh, rtanh_grad, sigmoid, Activation};
pub use adam::{adam_update, AdamConfig, AdamState, ParamGrad};
pub use dense::{DenseCache, DenseGrads, DenseLayer};
pub use dropout::{dropout_apply, DropoutMode};
pub use loss::mae_loss;
pub use lstm::{lstm_step, LstmCell, LstmGrads, LstmState, LstmStepCache};
pub use smooth::{gaussian_kernel, gaussian_smooth, gaussian_smooth_backward};
pub use tensor::Tensor;
