//! Training loop: combined regression + conditional phase loss, curriculum
//! case feeding, Adam updates, and stagnation-based early stopping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::gmm::PhaseGmm;
use crate::model::regressor::ProgressRegressor;
use crate::nn::activation::Activation;
use crate::nn::adam::{AdamConfig, AdamState};
use crate::nn::dropout::site_seed;
use crate::nn::loss::mae_loss;
use crate::scalar::{real, Real};
use crate::trace::{label_completeness, PhaseSchema, ProcessTrace};

/// Weights of the combined loss `alpha * Loss_c + beta * Loss_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights<T> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> Default for LossWeights<T> {
    fn default() -> Self {
        LossWeights {
            alpha: real(0.6),
            beta: real(0.4),
        }
    }
}

impl<T: Real> LossWeights<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        let w = LossWeights { alpha, beta };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha < T::zero() || self.beta < T::zero() {
            return Err(Error::usage("loss weights must be non-negative"));
        }
        if self.alpha + self.beta <= T::zero() {
            return Err(Error::usage("alpha + beta must be positive"));
        }
        Ok(())
    }
}

/// `alpha * Loss_c + beta * Loss_p`. With `beta = 0` the model is a pure
/// regressor; with `alpha = 0` it trains as a classifier.
#[inline]
pub fn combined_loss<T: Real>(loss_c: T, loss_p: T, weights: &LossWeights<T>) -> T {
    weights.alpha * loss_c + weights.beta * loss_p
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig<T> {
    /// Traces in the initial curriculum.
    pub curriculum_start_cases: usize,
    /// Epoch loss below this admits one more trace into the active set.
    pub curriculum_loss_threshold: T,
    /// Consecutive stagnant epochs before stopping.
    pub early_stop_patience: usize,
    /// Epoch-to-epoch loss change below this counts as stagnation.
    pub early_stop_delta: T,
    pub max_epochs: usize,
    /// Truncated-BPTT window in frames; `None` backpropagates through the
    /// whole trace.
    pub bptt_window: Option<usize>,
    pub dropout_rate: T,
    pub seed: u64,
    pub adam: AdamConfig<T>,
    pub loss_weights: LossWeights<T>,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        TrainConfig {
            curriculum_start_cases: 2,
            curriculum_loss_threshold: real(0.05),
            early_stop_patience: 3,
            early_stop_delta: real(1e-4),
            max_epochs: 250,
            bptt_window: None,
            dropout_rate: real(0.05),
            seed: 0,
            adam: AdamConfig::default(),
            loss_weights: LossWeights::default(),
        }
    }
}

impl<T: Real> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.early_stop_patience == 0 {
            return Err(Error::usage("early_stop_patience must be >= 1"));
        }
        if self.curriculum_loss_threshold <= T::zero() {
            return Err(Error::usage("curriculum_loss_threshold must be positive"));
        }
        if self.early_stop_delta <= T::zero() {
            return Err(Error::usage("early_stop_delta must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::usage("max_epochs must be >= 1"));
        }
        if self.dropout_rate < T::zero() || self.dropout_rate >= T::one() {
            return Err(Error::usage("dropout_rate must be in [0, 1)"));
        }
        if let Some(w) = self.bptt_window {
            if w == 0 {
                return Err(Error::usage("bptt_window must be >= 1 when set"));
            }
        }
        self.loss_weights.validate()
    }
}

/// One epoch of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog<T> {
    pub epoch: usize,
    pub active_cases: usize,
    pub loss_c: T,
    pub loss_p: T,
    pub total: T,
}

struct PreparedTrace<T> {
    features: Vec<Vec<T>>,
    labels: Vec<T>,
    phases: Vec<usize>,
}

fn prepare<T: Real>(traces: &[ProcessTrace<T>]) -> Result<Vec<PreparedTrace<T>>> {
    traces
        .iter()
        .map(|trace| {
            Ok(PreparedTrace {
                features: trace.frames.iter().map(|f| f.features.clone()).collect(),
                labels: label_completeness(trace)?.values().to_vec(),
                phases: trace.phase_sequence(),
            })
        })
        .collect()
}

/// Combined loss and its gradient w.r.t. the smoothed outputs for one
/// trace. `loss_p` averages the conditional phase loss over all frames,
/// with boundary-phase frames contributing zero.
fn trace_loss<T: Real>(
    gmm: &PhaseGmm<T>,
    smoothed: &[T],
    prepared: &PreparedTrace<T>,
    weights: &LossWeights<T>,
) -> Result<(T, T, Vec<T>)> {
    let n = smoothed.len();
    let n_t = real::<T>(n as f64);
    let (loss_c, mae_grad) = mae_loss(smoothed, &prepared.labels)?;
    let mut d_smoothed: Vec<T> = mae_grad.iter().map(|&g| weights.alpha * g).collect();
    let mut loss_p_sum = T::zero();
    for i in 0..n {
        let phase = prepared.phases[i];
        if gmm.schema().is_interior(phase) {
            let (lp, dlp) = gmm.conditional_loss(smoothed[i], phase)?;
            loss_p_sum += lp;
            d_smoothed[i] += weights.beta * dlp / n_t;
        }
    }
    let loss_p = loss_p_sum / n_t;
    Ok((loss_c, loss_p, d_smoothed))
}

/// Train the regressor in place and return the per-epoch log.
///
/// The curriculum starts with `curriculum_start_cases` traces and admits
/// one more whenever the epoch loss on the active set drops below the
/// threshold. Early stopping waits until all traces are active, then stops
/// once the epoch loss has changed by less than `early_stop_delta` for
/// `early_stop_patience` consecutive epochs.
pub fn train<T: Real>(
    model: &mut ProgressRegressor<T>,
    traces: &[ProcessTrace<T>],
    gmm: &PhaseGmm<T>,
    config: &TrainConfig<T>,
) -> Result<Vec<EpochLog<T>>> {
    config.validate()?;
    if traces.is_empty() {
        return Err(Error::usage("training set is empty"));
    }
    let prepared = prepare(traces)?;
    let total_cases = traces.len();
    let mut active = config.curriculum_start_cases.clamp(1, total_cases);
    let mut adam = AdamState::new(config.adam.clone());
    let mut log = Vec::new();
    let mut prev_total: Option<T> = None;
    let mut stagnant = 0usize;

    for epoch in 1..=config.max_epochs {
        let mut frames_total = T::zero();
        let mut sum_c = T::zero();
        let mut sum_p = T::zero();

        for (trace_index, p) in prepared.iter().take(active).enumerate() {
            let pass = model.forward_train(
                &p.features,
                config.dropout_rate,
                site_seed(config.seed, epoch, trace_index, 0),
            )?;
            let (loss_c, loss_p, d_smoothed) =
                trace_loss(gmm, &pass.smoothed, p, &config.loss_weights)?;
            let total = combined_loss(loss_c, loss_p, &config.loss_weights);
            if !total.is_finite() {
                return Err(Error::numeric(format!(
                    "training diverged at epoch {epoch} on trace {}",
                    traces[trace_index].id
                )));
            }
            let n_t = real::<T>(p.features.len() as f64);
            sum_c += loss_c * n_t;
            sum_p += loss_p * n_t;
            frames_total += n_t;

            let grads = model.backward(&pass, &d_smoothed, config.bptt_window)?;
            model.adam_step(&grads, &mut adam)?;
        }

        let epoch_c = sum_c / frames_total;
        let epoch_p = sum_p / frames_total;
        let epoch_total = combined_loss(epoch_c, epoch_p, &config.loss_weights);
        if !epoch_total.is_finite() {
            return Err(Error::numeric(format!("training diverged at epoch {epoch}")));
        }
        log.push(EpochLog {
            epoch,
            active_cases: active,
            loss_c: epoch_c,
            loss_p: epoch_p,
            total: epoch_total,
        });

        if active == total_cases {
            if let Some(prev) = prev_total {
                if (epoch_total - prev).abs() < config.early_stop_delta {
                    stagnant += 1;
                } else {
                    stagnant = 0;
                }
            }
            if stagnant >= config.early_stop_patience {
                break;
            }
        } else if epoch_total < config.curriculum_loss_threshold {
            active += 1;
        }
        prev_total = Some(epoch_total);
    }
    model.validate_finite()?;
    Ok(log)
}

/// Result of the rtanh-vs-sigmoid output activation comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActivationComparison<T> {
    pub rtanh_epochs: usize,
    pub sigmoid_epochs: usize,
    pub rtanh_final_mae: T,
    pub sigmoid_final_mae: T,
}

/// Mean absolute completeness error of a model over a dataset,
/// frame-weighted.
pub fn dataset_mae<T: Real>(
    model: &ProgressRegressor<T>,
    traces: &[ProcessTrace<T>],
) -> Result<T> {
    let mut total = T::zero();
    let mut frames = T::zero();
    for trace in traces {
        let estimates = model.forward(trace)?;
        let labels = label_completeness(trace)?;
        let (mae, _) = mae_loss(&estimates, labels.values())?;
        let n = real::<T>(trace.num_frames() as f64);
        total += mae * n;
        frames += n;
    }
    Ok(total / frames)
}

/// Train twice from one shared initialization, differing only in the
/// output activation, and report epochs-to-convergence (the early-stop
/// epoch count) plus the final MAE of each run.
pub fn compare_activations<T: Real>(
    traces: &[ProcessTrace<T>],
    schema: &PhaseSchema,
    regressor_config: &crate::model::regressor::RegressorConfig<T>,
    train_config: &TrainConfig<T>,
) -> Result<ActivationComparison<T>> {
    let gmm = PhaseGmm::fit(traces, schema)?;
    let base = ProgressRegressor::init(regressor_config.clone(), train_config.seed)?;

    let mut rtanh_model = base.clone();
    rtanh_model.set_output_activation(Activation::Rtanh)?;
    let rtanh_log = train(&mut rtanh_model, traces, &gmm, train_config)?;

    let mut sigmoid_model = base;
    sigmoid_model.set_output_activation(Activation::Sigmoid)?;
    let sigmoid_log = train(&mut sigmoid_model, traces, &gmm, train_config)?;

    Ok(ActivationComparison {
        rtanh_epochs: rtanh_log.len(),
        sigmoid_epochs: sigmoid_log.len(),
        rtanh_final_mae: dataset_mae(&rtanh_model, traces)?,
        sigmoid_final_mae: dataset_mae(&sigmoid_model, traces)?,
    })
}
