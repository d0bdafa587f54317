//! `procest train`: whole-case split, GMM pre-training on ground truth,
//! regressor training, and persistence of model + log + resolved config.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use procest::format::load_dataset;
use procest::model::{
    save_model, LossWeights, ModelMeta, PhaseGmm, ProgressRegressor, RegressorConfig, TrainConfig,
};
use procest::nn::AdamConfig;
use procest::trace::{split_dataset, ProcessTrace};
use procest::{Error, Result};

use crate::args::TrainArgs;
use crate::{sidecar_path, write_config_sidecar};

/// The full resolved training run, written as the config sidecar and
/// accepted back through `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub regressor: RegressorConfig<f64>,
    pub train: TrainConfig<f64>,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub boundary_eps: f64,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        TrainRunConfig {
            // The feature dimension is replaced by the dataset's.
            regressor: RegressorConfig::new(1),
            train: TrainConfig::default(),
            test_fraction: 0.2,
            split_seed: 0,
            boundary_eps: procest::model::DEFAULT_BOUNDARY_EPS,
        }
    }
}

/// Start from `--config` (or defaults) and apply explicit flags on top.
pub fn resolve_config(args: &TrainArgs, feature_dim: usize) -> Result<TrainRunConfig> {
    let mut run: TrainRunConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::data(format!("{}: bad run config: {e}", path.display())))?
        }
        None => TrainRunConfig::default(),
    };
    run.regressor.feature_dim = feature_dim;

    if let Some(alpha) = args.alpha {
        run.train.loss_weights.alpha = alpha;
    }
    if let Some(beta) = args.beta {
        run.train.loss_weights.beta = beta;
    }
    if let Some(activation) = args.activation {
        run.regressor.output_activation = activation.into();
    }
    if let Some(seed) = args.seed {
        run.train.seed = seed;
        if args.split_seed.is_none() && args.config.is_none() {
            run.split_seed = seed;
        }
    }
    if let Some(split_seed) = args.split_seed {
        run.split_seed = split_seed;
    }
    if let Some(fraction) = args.test_fraction {
        run.test_fraction = fraction;
    }
    if let Some(epochs) = args.max_epochs {
        run.train.max_epochs = epochs;
    }
    if let Some(dim) = args.encoder_dim {
        run.regressor.encoder_dims = vec![dim];
    }
    if let Some(hidden) = args.hidden {
        run.regressor.lstm_hidden = hidden;
    }
    if let Some(fc1) = args.fc1 {
        run.regressor.fc1_dim = fc1;
    }
    if let Some(fc2) = args.fc2 {
        run.regressor.fc2_dim = fc2;
    }
    if let Some(sigma) = args.smooth_sigma {
        run.regressor.smooth_sigma = sigma;
    }
    if let Some(radius) = args.smooth_radius {
        run.regressor.smooth_radius = radius;
    }
    if let Some(dropout) = args.dropout {
        run.train.dropout_rate = dropout;
    }
    if let Some(lr) = args.learning_rate {
        run.train.adam = AdamConfig {
            learning_rate: lr,
            ..run.train.adam
        };
    }
    if let Some(decay) = args.decay {
        run.train.adam = AdamConfig {
            decay,
            ..run.train.adam
        };
    }
    if let Some(window) = args.window {
        run.train.bptt_window = Some(window);
    }
    if let Some(start) = args.curriculum_start {
        run.train.curriculum_start_cases = start;
    }
    if let Some(threshold) = args.curriculum_threshold {
        run.train.curriculum_loss_threshold = threshold;
    }
    if let Some(patience) = args.patience {
        run.train.early_stop_patience = patience;
    }
    if let Some(delta) = args.early_stop_delta {
        run.train.early_stop_delta = delta;
    }
    if let Some(eps) = args.boundary_eps {
        run.boundary_eps = eps;
    }
    if !(run.test_fraction > 0.0 && run.test_fraction < 1.0) {
        return Err(Error::usage(format!(
            "test fraction must be in (0, 1), got {}",
            run.test_fraction
        )));
    }
    LossWeights::new(run.train.loss_weights.alpha, run.train.loss_weights.beta)?;
    run.train.validate()?;
    run.regressor.validate()?;
    Ok(run)
}

pub fn write_training_log(path: &std::path::Path, log: &[procest::model::EpochLog<f64>]) -> Result<()> {
    let mut csv = String::from("epoch,active_cases,loss_c,loss_p,total\n");
    for entry in log {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            entry.epoch, entry.active_cases, entry.loss_c, entry.loss_p, entry.total
        );
    }
    std::fs::write(path, csv)
        .map_err(|e| Error::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn run(args: TrainArgs) -> Result<()> {
    let traces: Vec<ProcessTrace<f64>> = load_dataset(&args.data)?;
    let schema = traces[0].schema.clone();
    let feature_dim = traces[0].feature_dim();
    for trace in &traces {
        if trace.schema != schema {
            return Err(Error::data(format!(
                "trace {} disagrees with the dataset schema",
                trace.id
            )));
        }
        if trace.feature_dim() != feature_dim {
            return Err(Error::data(format!(
                "trace {} has {} features, dataset uses {feature_dim}",
                trace.id,
                trace.feature_dim()
            )));
        }
    }

    let run = resolve_config(&args, feature_dim)?;
    let (train_set, test_set) = split_dataset(traces, run.test_fraction, run.split_seed)?;
    let test_ids: Vec<String> = test_set.iter().map(|t| t.id.clone()).collect();

    let gmm = PhaseGmm::fit(&train_set, &schema)?
        .with_boundary_eps(run.boundary_eps, run.boundary_eps)?;

    let mut model = ProgressRegressor::init(run.regressor.clone(), run.train.seed)?;
    let log = procest::model::train(&mut model, &train_set, &gmm, &run.train)?;

    let meta = ModelMeta {
        train: run.train.clone(),
        test_fraction: run.test_fraction,
        split_seed: run.split_seed,
        test_ids,
    };
    save_model(&args.out, &model, &gmm, &meta)?;
    write_training_log(&sidecar_path(&args.out, "log.csv"), &log)?;
    write_config_sidecar(&args.out, &run)?;

    let last = log.last().expect("at least one epoch");
    println!(
        "trained on {} cases ({} held out) for {} epochs; final loss_c={:.4} loss_p={:.4} total={:.4}",
        train_set.len(),
        meta.test_ids.len(),
        last.epoch,
        last.loss_c,
        last.loss_p,
        last.total
    );
    println!("model: {}", args.out.display());
    Ok(())
}
