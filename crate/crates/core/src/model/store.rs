//! Model persistence: one versioned JSON document carrying the regressor
//! config, phase schema, mixture parameters, run metadata, and every
//! weight tensor flattened row-major with its shape.
//!
//! Floats are rendered as shortest-round-trip decimals, so a save/load
//! cycle reproduces the file byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::gmm::{GaussKernel, PhaseGmm};
use crate::model::regressor::{ProgressRegressor, RegressorConfig};
use crate::model::trainer::TrainConfig;
use crate::scalar::Real;
use crate::trace::PhaseSchema;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NamedTensor<T> {
    name: String,
    shape: Vec<usize>,
    data: Vec<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GmmDoc<T> {
    kernels: Vec<GaussKernel<T>>,
    eps0: T,
    eps1: T,
}

/// Run metadata stored with the model so evaluation can reproduce the
/// training-time split and settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMeta<T> {
    pub train: TrainConfig<T>,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub test_ids: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc<T> {
    version: u32,
    schema: PhaseSchema,
    regressor: RegressorConfig<T>,
    gmm: GmmDoc<T>,
    meta: ModelMeta<T>,
    params: Vec<NamedTensor<T>>,
}

/// A loaded model bundle.
#[derive(Debug, Clone)]
pub struct SavedModel<T> {
    pub regressor: ProgressRegressor<T>,
    pub gmm: PhaseGmm<T>,
    pub meta: ModelMeta<T>,
}

pub fn save_model<T: Real>(
    path: &Path,
    model: &ProgressRegressor<T>,
    gmm: &PhaseGmm<T>,
    meta: &ModelMeta<T>,
) -> Result<()> {
    model.validate_finite()?;
    let doc = ModelDoc {
        version: MODEL_FORMAT_VERSION,
        schema: gmm.schema().clone(),
        regressor: model.config().clone(),
        gmm: GmmDoc {
            kernels: gmm.kernels().to_vec(),
            eps0: gmm.eps0(),
            eps1: gmm.eps1(),
        },
        meta: meta.clone(),
        params: model
            .named_params()
            .into_iter()
            .map(|(name, tensor)| NamedTensor {
                name,
                shape: tensor.shape().to_vec(),
                data: tensor.data().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::usage(format!("serialize model: {e}")))?;
    fs::write(path, json)
        .map_err(|e| Error::usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn load_model<T: Real>(path: &Path) -> Result<SavedModel<T>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let doc: ModelDoc<T> = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("{}: malformed model file: {e}", path.display())))?;
    if doc.version != MODEL_FORMAT_VERSION {
        return Err(Error::data(format!(
            "{}: unsupported model version {}",
            path.display(),
            doc.version
        )));
    }

    let mut regressor = ProgressRegressor::init(doc.regressor, 0)?;
    let mut provided: std::collections::HashMap<String, NamedTensor<T>> = doc
        .params
        .into_iter()
        .map(|t| (t.name.clone(), t))
        .collect();
    for (name, tensor) in regressor.named_params_mut() {
        let stored = provided.remove(&name).ok_or_else(|| {
            Error::data(format!("{}: missing parameter block {name}", path.display()))
        })?;
        if stored.shape != tensor.shape() {
            return Err(Error::data(format!(
                "{}: parameter {name} has shape {:?}, expected {:?}",
                path.display(),
                stored.shape,
                tensor.shape()
            )));
        }
        tensor.data_mut().copy_from_slice(&stored.data);
    }
    if let Some(extra) = provided.keys().next() {
        return Err(Error::data(format!(
            "{}: unexpected parameter block {extra}",
            path.display()
        )));
    }
    regressor.validate_finite()?;

    let gmm = PhaseGmm::new(doc.schema, doc.gmm.kernels, doc.gmm.eps0, doc.gmm.eps1)?;
    Ok(SavedModel {
        regressor,
        gmm,
        meta: doc.meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gmm::PhaseGmm;
    use crate::sim::{generate_dataset, SimulatorConfig};

    fn bundle() -> (ProgressRegressor<f64>, PhaseGmm<f64>, ModelMeta<f64>) {
        let config = SimulatorConfig::<f64>::new(2, 3, 4, 5);
        let traces = generate_dataset(&config).unwrap();
        let schema = traces[0].schema.clone();
        let gmm = PhaseGmm::fit(&traces, &schema).unwrap();
        let regressor =
            ProgressRegressor::init(RegressorConfig::new(5), 17).unwrap();
        let meta = ModelMeta {
            train: TrainConfig::default(),
            test_fraction: 0.2,
            split_seed: 2,
            test_ids: vec!["case-0001".into()],
        };
        (regressor, gmm, meta)
    }

    #[test]
    fn save_load_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (model, gmm, meta) = bundle();
        let path_a = dir.path().join("model.json");
        save_model(&path_a, &model, &gmm, &meta).unwrap();

        let loaded = load_model::<f64>(&path_a).unwrap();
        assert_eq!(loaded.gmm, gmm);
        assert_eq!(loaded.meta.test_ids, meta.test_ids);
        for ((n1, t1), (n2, t2)) in model
            .named_params()
            .into_iter()
            .zip(loaded.regressor.named_params())
        {
            assert_eq!(n1, n2);
            assert_eq!(t1, t2);
        }

        let path_b = dir.path().join("model2.json");
        save_model(&path_b, &loaded.regressor, &loaded.gmm, &loaded.meta).unwrap();
        assert_eq!(fs::read(&path_a).unwrap(), fs::read(&path_b).unwrap());
    }

    #[test]
    fn loading_garbage_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{\"version\": 1}").unwrap();
        let err = load_model::<f64>(&path).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
