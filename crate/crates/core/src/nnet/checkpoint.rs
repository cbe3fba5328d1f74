//! Checkpoint container.
//!
//! A JSON object with the architecture (per-layer `in_channels`,
//! `out_channels`, `kernel_size`, `activation`), `param_count`, flat
//! `parameters`, the RMSProp constants and flat `accumulators`, the RNG `seed`
//! the number of optimizer `steps` taken and, for training checkpoints, the
//! mean loss of every step so far. Both flat arrays use the same order: for
//! each layer, weights indexed `[out][in][k]`, then biases.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::LayerSpec;
use super::model::{Architecture, Model};
use super::optim::{RmsProp, RmsPropConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "ecgseg-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSnapshot {
    #[serde(flatten)]
    pub config: RmsPropConfig,
    pub accumulators: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub architecture: Vec<LayerSpec>,
    pub param_count: usize,
    pub parameters: Vec<f64>,
    pub optimizer: Option<OptimizerSnapshot>,
    pub seed: u64,
    pub steps: usize,
    #[serde(default)]
    pub step_losses: Vec<f64>,
}

impl Checkpoint {
    pub fn new(model: &Model, optimizer: Option<&RmsProp>, seed: u64, steps: usize) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            architecture: model.architecture().layers,
            param_count: model.param_count(),
            parameters: model.flatten(),
            optimizer: optimizer.map(|o| OptimizerSnapshot {
                config: o.config,
                accumulators: o.flatten(),
            }),
            seed,
            steps,
            step_losses: Vec::new(),
        }
    }

    pub fn model(&self) -> Result<Model> {
        let arch = Architecture::new(self.architecture.clone())?;
        if arch.param_count() != self.param_count {
            return Err(Error::Shape(format!(
                "checkpoint claims {} parameters, architecture has {}",
                self.param_count,
                arch.param_count()
            )));
        }
        Model::from_flat(&arch, &self.parameters)
    }

    /// Optimizer state shaped for `model`, if the checkpoint carries one.
    pub fn optimizer(&self, model: &Model) -> Result<Option<RmsProp>> {
        let Some(snapshot) = &self.optimizer else {
            return Ok(None);
        };
        let mut opt = RmsProp::new(snapshot.config, model);
        let mut rest = snapshot.accumulators.as_slice();
        for block in &mut opt.accumulators {
            if rest.len() < block.len() {
                return Err(Error::Shape("optimizer state shorter than the model".into()));
            }
            let (head, tail) = rest.split_at(block.len());
            block.copy_from_slice(head);
            rest = tail;
        }
        if !rest.is_empty() {
            return Err(Error::Shape("optimizer state longer than the model".into()));
        }
        Ok(Some(opt))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|source| Error::Json {
            context: "serializing checkpoint".into(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "parsing checkpoint".into(),
            source,
        })?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::parse(
                "format",
                format!("unsupported checkpoint format `{}`", ckpt.format),
            ));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let tmp = path.with_extension("json.partial");
        fs::write(&tmp, self.to_json()?).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }
}
