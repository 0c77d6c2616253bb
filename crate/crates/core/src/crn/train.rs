//! Minibatch Adam training with best-epoch early stopping.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{loss_and_grad, mean_loss, Example};
use super::params::CrnParams;
use crate::error::{Error, Result};
use crate::featurize::{FeatureSpace, VectorSet};
use crate::qgen::LabeledPair;
use crate::seed;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Non-improving epochs tolerated before stopping.
    pub patience: usize,
    /// Labels below this are raised to it inside the q-error.
    pub label_floor: f64,
    /// Root seed; initialization and shuffling use its `init` and `shuffle`
    /// substreams.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 64,
            batch_size: 128,
            learning_rate: 1e-3,
            max_epochs: 100,
            patience: 10,
            label_floor: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::Training { epoch: 0, reason });
        if self.hidden == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return bad("hidden, batch_size and max_epochs must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.label_floor > 0.0 && self.label_floor <= 0.01) {
            return bad(format!("label floor {} outside (0, 0.01]", self.label_floor));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Validation mean q-error of the freshly initialized parameters.
    pub initial_val: f64,
    /// Validation mean q-error after each epoch; `curve[i]` is epoch `i + 1`.
    pub curve: Vec<f64>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_val: f64,
    /// Excluded from equality-sensitive outputs such as checkpoints.
    pub wall_secs: f64,
}

impl TrainReport {
    /// The report without its timing, for reproducibility comparisons.
    pub fn same_run(&self, other: &TrainReport) -> bool {
        self.initial_val.to_bits() == other.initial_val.to_bits()
            && self.best_epoch == other.best_epoch
            && self.best_val.to_bits() == other.best_val.to_bits()
            && self.curve.len() == other.curve.len()
            && self
                .curve
                .iter()
                .zip(&other.curve)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

struct Encoded {
    v1: VectorSet,
    v2: VectorSet,
    rate: f64,
}

fn encode(space: &FeatureSpace, pairs: &[LabeledPair]) -> Result<Vec<Encoded>> {
    pairs
        .iter()
        .map(|p| {
            Ok(Encoded {
                v1: space.featurize(&p.q1)?,
                v2: space.featurize(&p.q2)?,
                rate: p.rate,
            })
        })
        .collect()
}

fn examples(data: &[Encoded]) -> Vec<Example<'_>> {
    data.iter().map(|e| (&e.v1, &e.v2, e.rate)).collect()
}

struct Adam {
    m: CrnParams,
    v: CrnParams,
    step: i32,
}

impl Adam {
    fn new(params: &CrnParams) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut CrnParams, grad: &CrnParams, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grad.tensors()).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Trains from a seeded initialization and returns the parameters of the
/// epoch with the lowest validation mean q-error.
///
/// Training stops at `max_epochs`, or once more than `patience` consecutive
/// epochs fail to improve on the best validation loss.
pub fn train(
    space: &FeatureSpace,
    train_set: &[LabeledPair],
    validation: &[LabeledPair],
    cfg: &TrainConfig,
) -> Result<(CrnParams, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() || validation.is_empty() {
        return Err(Error::Training {
            epoch: 0,
            reason: "training and validation sets must be nonempty".into(),
        });
    }
    let start = Instant::now();
    let train_data = encode(space, train_set)?;
    let val_data = encode(space, validation)?;
    let val_ex = examples(&val_data);

    let mut params = CrnParams::init(space.width(), cfg.hidden, seed::substream(cfg.seed, "init"))?;
    let mut shuffle_rng = seed::sub_rng(cfg.seed, "shuffle");
    let mut adam = Adam::new(&params);

    let diverged = |epoch: usize, e: Error| Error::Training {
        epoch,
        reason: e.to_string(),
    };
    let initial_val = mean_loss(&params, &val_ex, cfg.label_floor).map_err(|e| diverged(0, e))?;

    let mut best = (params.clone(), f64::INFINITY, 0usize);
    let mut curve = Vec::new();
    let mut stale = 0usize;
    let mut order: Vec<usize> = (0..train_data.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Example<'_>> = chunk
                .iter()
                .map(|&i| {
                    let e = &train_data[i];
                    (&e.v1, &e.v2, e.rate)
                })
                .collect();
            let (_, grad) = loss_and_grad(&params, &batch, cfg.label_floor).map_err(|e| diverged(epoch, e))?;
            adam.update(&mut params, &grad, cfg.learning_rate);
            if !params.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: "parameters became non-finite".into(),
                });
            }
        }
        let val = mean_loss(&params, &val_ex, cfg.label_floor).map_err(|e| diverged(epoch, e))?;
        curve.push(val);
        if val < best.1 {
            best = (params.clone(), val, epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                break;
            }
        }
    }

    let (params, best_val, best_epoch) = best;
    Ok((
        params,
        TrainReport {
            initial_val,
            curve,
            best_epoch,
            best_val,
            wall_secs: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Writes `epoch,val_mean_qerror` rows; epoch 0 is the untrained model.
pub fn write_curve_csv(path: impl AsRef<Path>, report: &TrainReport) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "val_mean_qerror"])?;
    w.write_record(["0".to_string(), report.initial_val.to_string()])?;
    for (i, v) in report.curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Trains once per hidden width with otherwise identical settings.
pub fn sweep_hidden(
    space: &FeatureSpace,
    train_set: &[LabeledPair],
    validation: &[LabeledPair],
    cfg: &TrainConfig,
    hidden: &[usize],
) -> Result<Vec<(usize, TrainReport)>> {
    hidden
        .iter()
        .map(|&h| {
            let c = TrainConfig {
                hidden: h,
                ..cfg.clone()
            };
            train(space, train_set, validation, &c).map(|(_, r)| (h, r))
        })
        .collect()
}

/// Writes `hidden,epoch,val_mean_qerror` rows for every sweep run.
pub fn write_sweep_csv(path: impl AsRef<Path>, runs: &[(usize, TrainReport)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["hidden", "epoch", "val_mean_qerror"])?;
    for (h, r) in runs {
        w.write_record([h.to_string(), "0".into(), r.initial_val.to_string()])?;
        for (i, v) in r.curve.iter().enumerate() {
            w.write_record([h.to_string(), (i + 1).to_string(), v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
