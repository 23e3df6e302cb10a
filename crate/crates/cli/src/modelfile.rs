//! Versioned JSON model files.
//!
//! ```text
//! {"version":1,"task":"denoise","sigma":25.0,"T":3,"m":3,"n_k":8,
//!  "rbf":{"kind":"gaussian","M":31,"R":310.0,"gamma":20.66},
//!  "mode":"greedy","stages":[{"coeffs":[[..]],"weights":[[..]],"log_lambda":-2.3}]}
//! ```
//!
//! Floats are written in their shortest round-trip decimal form, so
//! `load(save(m)) == m` holds bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use trd_core::influence::{RbfConfig, RbfKind, RbfMixture};
use trd_core::model::{StageParams, Task, TrainedMode, TrdModel};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported model file version {0}, expected {FORMAT_VERSION}")]
    Version(u64),
    #[error("invalid model: {0}")]
    Invalid(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RbfRecord {
    kind: String,
    #[serde(rename = "M")]
    count: usize,
    #[serde(rename = "R")]
    radius: f64,
    gamma: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageRecord {
    coeffs: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    log_lambda: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    version: u64,
    task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quality: Option<u8>,
    #[serde(rename = "T")]
    stages_count: usize,
    m: usize,
    n_k: usize,
    rbf: RbfRecord,
    mode: String,
    stages: Vec<StageRecord>,
}

fn invalid(msg: impl Into<String>) -> ModelFileError {
    ModelFileError::Invalid(msg.into())
}

impl From<&TrdModel> for ModelRecord {
    fn from(model: &TrdModel) -> Self {
        let (task, sigma, quality) = match model.task {
            Task::Denoise { sigma } => ("denoise", Some(sigma), None),
            Task::Deblock { quality } => ("deblock", None, Some(quality)),
        };
        ModelRecord {
            version: FORMAT_VERSION,
            task: task.into(),
            sigma,
            quality,
            stages_count: model.num_stages(),
            m: model.filter_size,
            n_k: model.filters,
            rbf: RbfRecord {
                kind: model.rbf.kind().name().into(),
                count: model.rbf.count(),
                radius: model.rbf.radius(),
                gamma: model.rbf.gamma(),
            },
            mode: match model.trained_mode {
                TrainedMode::Greedy => "greedy",
                TrainedMode::Joint => "joint",
            }
            .into(),
            stages: model
                .stages
                .iter()
                .map(|s| StageRecord {
                    coeffs: s.coeffs.clone(),
                    weights: s.mixtures.iter().map(|m| m.weights().to_vec()).collect(),
                    log_lambda: s.log_lambda,
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelRecord> for TrdModel {
    type Error = ModelFileError;

    fn try_from(r: ModelRecord) -> Result<Self, ModelFileError> {
        if r.version != FORMAT_VERSION {
            return Err(ModelFileError::Version(r.version));
        }
        let task = match (r.task.as_str(), r.sigma, r.quality) {
            ("denoise", Some(sigma), None) => Task::Denoise { sigma },
            ("deblock", None, Some(quality)) => Task::Deblock { quality },
            ("denoise", _, _) => return Err(invalid("denoise models need `sigma` and no `quality`")),
            ("deblock", _, _) => return Err(invalid("deblock models need `quality` and no `sigma`")),
            (other, _, _) => return Err(invalid(format!("unknown task `{other}`"))),
        };
        let kind = RbfKind::parse(&r.rbf.kind).ok_or_else(|| invalid(format!("unknown RBF kind `{}`", r.rbf.kind)))?;
        let rbf = RbfConfig::with_gamma(kind, r.rbf.count, r.rbf.radius, r.rbf.gamma).map_err(|e| invalid(e.to_string()))?;
        let trained_mode = match r.mode.as_str() {
            "greedy" => TrainedMode::Greedy,
            "joint" => TrainedMode::Joint,
            other => return Err(invalid(format!("unknown training mode `{other}`"))),
        };
        if r.stages.len() != r.stages_count {
            return Err(invalid(format!("T = {} but {} stages present", r.stages_count, r.stages.len())));
        }
        let stages = r
            .stages
            .into_iter()
            .map(|s| {
                let mixtures = s
                    .weights
                    .into_iter()
                    .map(|w| RbfMixture::new(rbf, w))
                    .collect::<trd_core::Result<Vec<_>>>()
                    .map_err(|e| invalid(e.to_string()))?;
                Ok(StageParams {
                    coeffs: s.coeffs,
                    mixtures,
                    log_lambda: s.log_lambda,
                })
            })
            .collect::<Result<Vec<_>, ModelFileError>>()?;
        let model = TrdModel {
            task,
            filter_size: r.m,
            filters: r.n_k,
            rbf,
            stages,
            trained_mode,
        };
        model.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(model)
    }
}

pub fn model_to_json(model: &TrdModel) -> Result<String, ModelFileError> {
    model.validate().map_err(|e| invalid(e.to_string()))?;
    let mut s = serde_json::to_string(&ModelRecord::from(model))?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(text: &str) -> Result<TrdModel, ModelFileError> {
    let record: ModelRecord = serde_json::from_str(text)?;
    record.try_into()
}

pub fn save_model(model: &TrdModel, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    let path = path.as_ref();
    let text = model_to_json(model)?;
    fs::write(path, text).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrdModel, ModelFileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&text)
}
