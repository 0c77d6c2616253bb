//! Containment-rate estimation for conjunctive queries.
//!
//! The crate is organised bottom-up:
//!
//! - [`relstore`]: an in-memory integer relational store and the exact executor
//!   used as ground truth for cardinalities and containment rates.
//! - [`query`]: the `(tables, joins, predicates)` query representation.
//! - [`qgen`]: the seeded workload generator and labelled dataset files.
//! - [`featurize`]: the segmented one-hot vector encoding of queries.
//! - [`crn`]: the set-pooling containment-rate network, its gradients and trainer.
//! - [`estimators`]: cardinality/containment transformations and the queries pool.
//! - [`eval`]: q-error statistics and workload evaluation.

pub mod crn;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod featurize;
pub mod qgen;
pub mod query;
pub mod relstore;
pub mod seed;

pub use error::{Error, Result};
