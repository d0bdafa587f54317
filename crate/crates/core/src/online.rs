//! Online per-frame estimation: streaming completeness, phase, and
//! remaining time with O(1) memory in the trace length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::gmm::PhaseGmm;
use crate::model::regressor::ProgressRegressor;
use crate::nn::lstm::LstmState;
use crate::nn::smooth::{gaussian_kernel, smooth_one};
use crate::scalar::{real, Real};
use crate::trace::FeatureFrame;

/// Completeness below this leaves the remaining time undefined; the rate
/// estimate divides by completeness, and the pre-start regime carries no
/// speed information.
pub const DEFAULT_RHO_MIN: f64 = 0.01;

/// Remaining seconds from completeness `rho` and elapsed seconds `tau`:
/// `(tau / rho) * (1 - rho)`, i.e. the observed pace extrapolated over the
/// unfinished fraction. Returns `None` while `rho < rho_min`.
pub fn remaining_time_with<T: Real>(rho: T, tau: T, rho_min: T) -> Result<Option<T>> {
    if tau < T::zero() {
        return Err(Error::usage(format!("elapsed time must be >= 0, got {tau}")));
    }
    if !(rho >= T::zero() && rho <= T::one()) {
        return Err(Error::usage(format!("completeness {rho} outside [0,1]")));
    }
    if rho < rho_min {
        return Ok(None);
    }
    Ok(Some(tau / rho * (T::one() - rho)))
}

/// [`remaining_time_with`] under the default completeness floor.
pub fn remaining_time<T: Real>(rho: T, tau: T) -> Result<Option<T>> {
    remaining_time_with(rho, tau, real(DEFAULT_RHO_MIN))
}

/// Per-frame output: timestamp, completeness, phase name, and remaining
/// seconds (`None` = unknown, rendered as `null` on the wire).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport<T> {
    #[serde(rename = "t")]
    pub timestamp: T,
    pub completeness: T,
    pub phase: String,
    pub remaining_s: Option<T>,
}

/// Streaming estimator over a shared read-only model. Feeding a trace
/// frame by frame reproduces the batch forward pass bit for bit: the same
/// per-frame step and the same causal smoothing run in both paths.
pub struct OnlineEstimator<'a, T> {
    model: &'a ProgressRegressor<T>,
    gmm: &'a PhaseGmm<T>,
    kernel: Vec<T>,
    rho_min: T,
    state: LstmState<T>,
    /// Recent raw outputs, newest first, capped at radius + 1.
    window: Vec<T>,
    first_timestamp: Option<T>,
    last_timestamp: Option<T>,
}

impl<'a, T: Real> OnlineEstimator<'a, T> {
    pub fn new(model: &'a ProgressRegressor<T>, gmm: &'a PhaseGmm<T>) -> Result<Self> {
        Self::with_rho_min(model, gmm, real(DEFAULT_RHO_MIN))
    }

    pub fn with_rho_min(
        model: &'a ProgressRegressor<T>,
        gmm: &'a PhaseGmm<T>,
        rho_min: T,
    ) -> Result<Self> {
        let kernel = gaussian_kernel(model.smooth_sigma(), model.smooth_radius())?;
        Ok(OnlineEstimator {
            model,
            gmm,
            kernel,
            rho_min,
            state: model.zero_lstm_state(),
            window: Vec::with_capacity(model.smooth_radius() + 1),
            first_timestamp: None,
            last_timestamp: None,
        })
    }

    /// Consume one frame and emit a report.
    pub fn step(&mut self, frame: &FeatureFrame<T>) -> Result<ProgressReport<T>> {
        if let Some(last) = self.last_timestamp {
            if frame.timestamp <= last {
                return Err(Error::data(format!(
                    "out-of-order timestamp {} after {last}",
                    frame.timestamp
                )));
            }
        }
        let raw = self.model.step_frame(&mut self.state, &frame.features)?;
        self.window.insert(0, raw);
        if self.window.len() > self.model.smooth_radius() + 1 {
            self.window.pop();
        }
        let completeness = smooth_one(&self.kernel, &self.window);

        let first = *self.first_timestamp.get_or_insert(frame.timestamp);
        self.last_timestamp = Some(frame.timestamp);
        let tau = frame.timestamp - first;

        let phase_index = self.gmm.predict(completeness)?;
        let phase = self
            .gmm
            .schema()
            .name(phase_index)
            .unwrap_or("?")
            .to_string();
        let remaining_s = remaining_time_with(completeness, tau, self.rho_min)?;
        Ok(ProgressReport {
            timestamp: frame.timestamp,
            completeness,
            phase,
            remaining_s,
        })
    }

    /// Clear all per-enactment state so the estimator can serve a new
    /// process instance.
    pub fn reset(&mut self) {
        self.state = self.model.zero_lstm_state();
        self.window.clear();
        self.first_timestamp = None;
        self.last_timestamp = None;
    }
}
