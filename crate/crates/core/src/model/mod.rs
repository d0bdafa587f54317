//! The progress model: completeness regressor, per-phase Gaussian mixture,
//! combined loss, training loop, and model persistence.

pub mod gmm;
pub mod regressor;
pub mod store;
pub mod trainer;

pub use gmm::{GaussKernel, PhaseGmm, DEFAULT_BOUNDARY_EPS, SIGMA_MIN};
pub use regressor::{ProgressRegressor, RegressorConfig, RegressorGradients};
pub use store::{load_model, save_model, ModelMeta, SavedModel, MODEL_FORMAT_VERSION};
pub use trainer::{
    combined_loss, compare_activations, train, ActivationComparison, EpochLog, LossWeights,
    TrainConfig,
};
