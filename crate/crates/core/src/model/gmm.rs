//! Per-phase Gaussian mixture over completeness.
//!
//! Each interior phase gets one 1-D Gaussian kernel over the completeness
//! axis; the phase for a completeness value is the kernel with the largest
//! weighted log-likelihood. Boundary phases (pre-start, ended) are not
//! modeled by kernels; they are detected by thresholds near 0 and 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::trace::{label_completeness, PhaseSchema, ProcessTrace};

/// Minimum kernel standard deviation.
pub const SIGMA_MIN: f64 = 1e-3;
/// Default completeness thresholds for the boundary phases.
pub const DEFAULT_BOUNDARY_EPS: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussKernel<T> {
    pub weight: T,
    pub mean: T,
    pub std: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGmm<T> {
    schema: PhaseSchema,
    /// One kernel per interior phase, in schema order.
    kernels: Vec<GaussKernel<T>>,
    /// Completeness below `eps0` maps to the start boundary phase.
    eps0: T,
    /// Completeness above `1 - eps1` maps to the end boundary phase.
    eps1: T,
}

impl<T: Real> PhaseGmm<T> {
    pub fn new(schema: PhaseSchema, kernels: Vec<GaussKernel<T>>, eps0: T, eps1: T) -> Result<Self> {
        let interior = schema.interior_range().len();
        if kernels.len() != interior {
            return Err(Error::usage(format!(
                "schema has {interior} interior phases, got {} kernels",
                kernels.len()
            )));
        }
        if kernels.is_empty() {
            return Err(Error::usage("phase mixture needs at least one interior phase"));
        }
        if eps0 < T::zero() || eps1 < T::zero() {
            return Err(Error::usage("boundary thresholds must be non-negative"));
        }
        let mut weight_sum = T::zero();
        let mut prev_mean: Option<T> = None;
        let sigma_min = real::<T>(SIGMA_MIN);
        for (i, kernel) in kernels.iter().enumerate() {
            if kernel.weight <= T::zero() {
                return Err(Error::data(format!("kernel {i} has non-positive weight")));
            }
            if kernel.std < sigma_min {
                return Err(Error::data(format!(
                    "kernel {i} std {} below minimum {SIGMA_MIN}",
                    kernel.std
                )));
            }
            if kernel.mean < T::zero() || kernel.mean > T::one() {
                return Err(Error::data(format!("kernel {i} mean outside [0,1]")));
            }
            if let Some(prev) = prev_mean {
                if kernel.mean <= prev {
                    return Err(Error::data(format!(
                        "kernel means must strictly increase (kernel {i}); the process is not linear"
                    )));
                }
            }
            prev_mean = Some(kernel.mean);
            weight_sum += kernel.weight;
        }
        if (weight_sum - T::one()).abs() > real(1e-9) {
            return Err(Error::data(format!("kernel weights sum to {weight_sum}, expected 1")));
        }
        Ok(PhaseGmm {
            schema,
            kernels,
            eps0,
            eps1,
        })
    }

    /// Pre-train from ground truth: for each interior phase, the kernel
    /// weight is its share of interior frames and the mean/std are the
    /// moments of the completeness labels over its frames.
    pub fn fit(traces: &[ProcessTrace<T>], schema: &PhaseSchema) -> Result<Self> {
        let interior = schema.interior_range();
        let offset = interior.start;
        let count = interior.len();
        if count == 0 {
            return Err(Error::usage("schema has no interior phases to model"));
        }
        let mut sums = vec![T::zero(); count];
        let mut sq_sums = vec![T::zero(); count];
        let mut counts = vec![0usize; count];
        for trace in traces {
            if trace.schema != *schema {
                return Err(Error::data(format!(
                    "trace {} does not match the fitting schema",
                    trace.id
                )));
            }
            let labels = label_completeness(trace)?;
            let phases = trace.phase_sequence();
            for (&label, &phase) in labels.values().iter().zip(&phases) {
                if schema.is_interior(phase) {
                    let k = phase - offset;
                    sums[k] += label;
                    sq_sums[k] += label * label;
                    counts[k] += 1;
                }
            }
        }
        let total: usize = counts.iter().sum();
        let mut kernels = Vec::with_capacity(count);
        let sigma_min = real::<T>(SIGMA_MIN);
        for k in 0..count {
            if counts[k] == 0 {
                return Err(Error::data(format!(
                    "phase {:?} never occurs in the training traces",
                    schema.name(k + offset).unwrap_or("?")
                )));
            }
            let n = real::<T>(counts[k] as f64);
            let mean = sums[k] / n;
            let variance = (sq_sums[k] / n - mean * mean).max(T::zero());
            kernels.push(GaussKernel {
                weight: n / real(total as f64),
                mean,
                std: variance.sqrt().max(sigma_min),
            });
        }
        PhaseGmm::new(
            schema.clone(),
            kernels,
            real(DEFAULT_BOUNDARY_EPS),
            real(DEFAULT_BOUNDARY_EPS),
        )
    }

    /// Same kernels with different boundary thresholds.
    pub fn with_boundary_eps(mut self, eps0: T, eps1: T) -> Result<Self> {
        if eps0 < T::zero() || eps1 < T::zero() {
            return Err(Error::usage("boundary thresholds must be non-negative"));
        }
        self.eps0 = eps0;
        self.eps1 = eps1;
        Ok(self)
    }

    pub fn schema(&self) -> &PhaseSchema {
        &self.schema
    }

    pub fn kernels(&self) -> &[GaussKernel<T>] {
        &self.kernels
    }

    pub fn eps0(&self) -> T {
        self.eps0
    }

    pub fn eps1(&self) -> T {
        self.eps1
    }

    /// Weighted log-likelihood of interior kernel `k` at completeness `x`.
    pub fn log_likelihood(&self, k: usize, x: T) -> T {
        let kernel = &self.kernels[k];
        let two = real::<T>(2.0);
        let two_pi = real::<T>(std::f64::consts::TAU);
        let var = kernel.std * kernel.std;
        let diff = x - kernel.mean;
        kernel.weight.ln() - (two_pi * var).ln() / two - diff * diff / (two * var)
    }

    /// Phase index for a completeness value: boundary thresholds first,
    /// then the kernel argmax with ties broken toward the lower index.
    pub fn predict(&self, x: T) -> Result<usize> {
        if !(x >= T::zero() && x <= T::one()) {
            return Err(Error::usage(format!("completeness {x} outside [0,1]")));
        }
        if self.schema.boundary_start() && x < self.eps0 {
            return Ok(0);
        }
        if self.schema.boundary_end() && x > T::one() - self.eps1 {
            return Ok(self.schema.len() - 1);
        }
        let mut best = 0usize;
        let mut best_ll = self.log_likelihood(0, x);
        for k in 1..self.kernels.len() {
            let ll = self.log_likelihood(k, x);
            if ll > best_ll {
                best_ll = ll;
                best = k;
            }
        }
        Ok(self.schema.interior_range().start + best)
    }

    /// Conditional phase loss: zero when the mixture already predicts the
    /// true phase, otherwise the distance from the completeness value to
    /// the true phase's kernel mean. Also returns the gradient w.r.t. `x`.
    pub fn conditional_loss(&self, x: T, true_phase: usize) -> Result<(T, T)> {
        if !self.schema.is_interior(true_phase) {
            return Err(Error::usage(format!(
                "phase {true_phase} is not modeled by the mixture"
            )));
        }
        let predicted = self.predict(x)?;
        if predicted == true_phase {
            return Ok((T::zero(), T::zero()));
        }
        let mean = self.kernels[true_phase - self.schema.interior_range().start].mean;
        let diff = x - mean;
        let grad = if diff > T::zero() {
            T::one()
        } else if diff < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        Ok((diff.abs(), grad))
    }

    /// Same means, equal weights, and one shared standard deviation (the
    /// average of the fitted ones). Decision regions become intervals
    /// ordered by the means, so a non-decreasing completeness sequence can
    /// never fragment.
    pub fn equalized(&self) -> PhaseGmm<T> {
        let n = real::<T>(self.kernels.len() as f64);
        let avg_std = self.kernels.iter().map(|k| k.std).sum::<T>() / n;
        let kernels = self
            .kernels
            .iter()
            .map(|k| GaussKernel {
                weight: T::one() / n,
                mean: k.mean,
                std: avg_std,
            })
            .collect();
        PhaseGmm {
            schema: self.schema.clone(),
            kernels,
            eps0: self.eps0,
            eps1: self.eps1,
        }
    }
}
