//! The containment-rate network.
//!
//! Each query is featurized into a set of vectors; the sets of the two queries
//! are pooled by separate one-layer networks, combined by [`model::expand`],
//! and mapped to a rate in `(0, 1)` by a two-layer output network.

pub mod checkpoint;
pub mod model;
pub mod params;
pub mod train;

pub use checkpoint::{Checkpoint, TrainingMeta};
pub use model::{expand, forward, loss_and_grad, mean_loss, pool_set, qerror};
pub use params::{CrnParams, Dense};
pub use train::{sweep_hidden, train, write_curve_csv, write_sweep_csv, TrainConfig, TrainReport};

use crate::error::{Error, Result};
use crate::featurize::FeatureSpace;
use crate::query::{same_from, Query};

/// A feature space paired with parameters of matching width.
#[derive(Debug, Clone, PartialEq)]
pub struct Crn {
    pub space: FeatureSpace,
    pub params: CrnParams,
}

impl Crn {
    pub fn new(space: FeatureSpace, params: CrnParams) -> Result<Self> {
        if params.input_width != space.width() {
            return Err(Error::Shape {
                expected: space.width(),
                actual: params.input_width,
            });
        }
        params.check_shapes()?;
        Ok(Crn { space, params })
    }

    /// Estimated fraction of `q1`'s result contained in `q2`'s result.
    pub fn predict(&self, q1: &Query, q2: &Query) -> Result<f64> {
        if !same_from(q1, q2) {
            return Err(Error::ContainmentDomain(format!(
                "FROM clauses differ: {{{}}} vs {{{}}}",
                q1.from_key(),
                q2.from_key()
            )));
        }
        let v1 = self.space.featurize(q1)?;
        let v2 = self.space.featurize(q2)?;
        forward(&self.params, &v1, &v2)
    }
}
