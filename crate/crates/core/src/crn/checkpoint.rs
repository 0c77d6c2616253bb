//! JSON checkpoints: feature space, parameters and training metadata.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::CrnParams;
use super::train::{TrainConfig, TrainReport};
use super::Crn;
use crate::error::{Error, Result};
use crate::featurize::FeatureSpace;

pub const CHECKPOINT_FORMAT: &str = "crn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Training provenance stored with the weights. Wall time is left out so
/// that identical runs produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: TrainConfig,
    pub train_pairs: usize,
    pub validation_pairs: usize,
    pub initial_val: f64,
    pub best_epoch: usize,
    pub best_val: f64,
    pub curve: Vec<f64>,
}

impl TrainingMeta {
    pub fn new(config: &TrainConfig, report: &TrainReport, train_pairs: usize, validation_pairs: usize) -> Self {
        TrainingMeta {
            config: config.clone(),
            train_pairs,
            validation_pairs,
            initial_val: report.initial_val,
            best_epoch: report.best_epoch,
            best_val: report.best_val,
            curve: report.curve.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub feature_space: FeatureSpace,
    pub params: CrnParams,
    pub training: Option<TrainingMeta>,
}

impl Checkpoint {
    pub fn new(model: &Crn, training: Option<TrainingMeta>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            feature_space: model.space.clone(),
            params: model.params.clone(),
            training,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        ck.feature_space = ck.feature_space.indexed();
        ck.params.check_shapes()?;
        if ck.params.input_width != ck.feature_space.width() {
            return Err(Error::Checkpoint(format!(
                "parameters expect width {}, feature space has {}",
                ck.params.input_width,
                ck.feature_space.width()
            )));
        }
        if !ck.params.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Loads and rejects checkpoints built for a different schema.
    pub fn load_for_schema(path: impl AsRef<Path>, schema_hash: &str) -> Result<Self> {
        let ck = Self::load(path)?;
        if ck.feature_space.schema_hash != schema_hash {
            return Err(Error::Checkpoint(format!(
                "checkpoint schema hash {} does not match {schema_hash}",
                ck.feature_space.schema_hash
            )));
        }
        Ok(ck)
    }

    /// Number of scalar parameters actually stored.
    pub fn scalar_count(&self) -> usize {
        self.params.param_count()
    }

    pub fn model(&self) -> Crn {
        Crn {
            space: self.feature_space.clone(),
            params: self.params.clone(),
        }
    }
}
