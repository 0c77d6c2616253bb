//! In-memory relational store: schemas, synthetic databases, and the exact
//! executor that serves as ground truth for cardinalities and containment.

mod database;
mod datagen;
mod exec;
mod io;
mod schema;

pub use database::{ColumnStats, Database};
pub use datagen::build_database;
pub use exec::{cardinality, execute, true_containment_rate, ResultSet};
pub use io::{dump, load, load_with_manifest, Manifest, TableFile, MANIFEST};
pub use schema::{ColumnDef, Schema, TableDef};
