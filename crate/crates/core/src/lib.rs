//! Progress estimation for linear sequential processes.
//!
//! The pipeline has three outputs per frame: a completeness fraction in
//! `[0, 1)` from a recurrent regressor ending in a rectified-tanh neuron,
//! a discrete phase obtained from completeness through a per-phase
//! Gaussian mixture, and a remaining-time estimate from the observed
//! completion rate. Training combines the regression error with a
//! conditional phase loss; a seeded simulator provides reproducible
//! synthetic datasets, and the metrics module carries the full
//! evaluation battery.
//!
//! Everything numeric is generic over the scalar type via [`scalar::Real`];
//! `f64` aliases for the main types live at the crate root.

pub mod error;
pub mod format;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod online;
pub mod scalar;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
pub use scalar::{real, Real};

/// `f64` aliases for the main pipeline types.
pub type ProcessTrace64 = trace::ProcessTrace<f64>;
pub type CompletenessLabels64 = trace::CompletenessLabels<f64>;
pub type SimulatorConfig64 = sim::SimulatorConfig<f64>;
pub type ProgressRegressor64 = model::ProgressRegressor<f64>;
pub type PhaseGmm64 = model::PhaseGmm<f64>;
pub type TrainConfig64 = model::TrainConfig<f64>;
pub type LossWeights64 = model::LossWeights<f64>;
pub type OnlineEstimator64<'a> = online::OnlineEstimator<'a, f64>;
pub type ProgressReport64 = online::ProgressReport<f64>;
