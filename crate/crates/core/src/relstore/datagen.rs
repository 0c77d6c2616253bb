//! Synthetic data with skewed foreign keys and cross-table correlations.
//!
//! Every row carries a latent score `z ∈ [0, 1]`. Root tables draw `z`
//! uniformly; a child row picks its parent through its first foreign key and
//! inherits a noisy copy of the parent's score. Parents with higher scores are
//! referenced more often, and non-key columns follow `z`, `1 - z`, or mostly
//! independent noise depending on their position. Predicates on a parent are
//! therefore correlated with both the fan-out of the join and the values in
//! the child tables, which is exactly what independence-based estimators miss.

use std::collections::BTreeMap;

use rand::distributions::WeightedIndex;
use rand::prelude::*;

use super::database::Database;
use super::schema::Schema;
use crate::error::{Error, Result};
use crate::query::ColumnRef;
use crate::seed;

const FANOUT_SKEW: f64 = 4.0;
const INHERIT: f64 = 0.7;

/// Generates a database deterministically from `(schema, row_counts, seed)`.
pub fn build_database(schema: &Schema, row_counts: &BTreeMap<String, usize>, seed: u64) -> Result<Database> {
    schema.validate()?;
    for t in &schema.tables {
        if !row_counts.contains_key(&t.name) {
            return Err(Error::Schema(format!("no row count given for `{}`", t.name)));
        }
    }
    if let Some(extra) = row_counts.keys().find(|t| schema.table(t).is_none()) {
        return Err(Error::Schema(format!("row count given for unknown table `{extra}`")));
    }

    // foreign key -> referenced table
    let mut fk_target: BTreeMap<ColumnRef, String> = BTreeMap::new();
    for (a, b) in &schema.join_edges {
        let (pk, fk) = if schema.is_primary_key(a) { (a, b) } else { (b, a) };
        fk_target.insert(fk.clone(), pk.table.clone());
    }

    let order = topo_order(schema, &fk_target)?;
    let mut rng = seed::rng(seed);
    let mut latent: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut rows: BTreeMap<String, Vec<Vec<i64>>> = BTreeMap::new();

    for ti in order {
        let t = &schema.tables[ti];
        let n = row_counts[&t.name];
        let mut z: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mut table_rows: Vec<Vec<i64>> = (0..n)
            .map(|i| {
                let mut r = vec![0i64; t.width()];
                r[0] = i as i64;
                r
            })
            .collect();

        let mut inherited = false;
        for (k, key) in t.key_cols.iter().enumerate().skip(1) {
            let fk = ColumnRef::new(&t.name, key);
            match fk_target.get(&fk) {
                Some(parent) => {
                    if n == 0 {
                        continue;
                    }
                    let pz = &latent[parent];
                    if pz.is_empty() {
                        return Err(Error::Schema(format!(
                            "foreign key `{fk}` references empty table `{parent}`"
                        )));
                    }
                    let weights = pz.iter().map(|&s| (0.05 + s).powf(FANOUT_SKEW));
                    let dist = WeightedIndex::new(weights)
                        .map_err(|e| Error::Schema(format!("fan-out weights for `{fk}`: {e}")))?;
                    for i in 0..n {
                        let p = dist.sample(&mut rng);
                        table_rows[i][k] = p as i64;
                        if !inherited {
                            z[i] = (INHERIT * pz[p] + (1.0 - INHERIT) * z[i]).clamp(0.0, 1.0);
                        }
                    }
                    inherited = true;
                }
                None => {
                    let hi = n.max(1) as i64;
                    for r in &mut table_rows {
                        r[k] = rng.gen_range(0..hi);
                    }
                }
            }
        }

        let base = t.key_cols.len();
        for (j, c) in t.cols.iter().enumerate() {
            let span = (c.max - c.min + 1) as f64;
            for i in 0..n {
                let u: f64 = rng.gen();
                let mix = match j % 3 {
                    0 => 0.8 * z[i] + 0.2 * u,
                    1 => 0.8 * (1.0 - z[i]) + 0.2 * u,
                    _ => 0.3 * z[i] + 0.7 * u,
                };
                let v = c.min + (mix * span).floor() as i64;
                table_rows[i][base + j] = v.min(c.max);
            }
        }

        latent.insert(t.name.clone(), z);
        rows.insert(t.name.clone(), table_rows);
    }

    Database::new(schema.clone(), rows)
}

fn topo_order(schema: &Schema, fk_target: &BTreeMap<ColumnRef, String>) -> Result<Vec<usize>> {
    let mut order = Vec::with_capacity(schema.tables.len());
    let mut placed = vec![false; schema.tables.len()];
    while order.len() < schema.tables.len() {
        let ready = schema.tables.iter().enumerate().find(|(i, t)| {
            !placed[*i]
                && fk_target
                    .iter()
                    .filter(|(fk, _)| fk.table == t.name)
                    .all(|(_, parent)| *parent == t.name || schema.table_index(parent).is_some_and(|pi| placed[pi]))
        });
        match ready {
            Some((i, _)) => {
                placed[i] = true;
                order.push(i);
            }
            None => {
                return Err(Error::Schema(
                    "foreign keys form a cycle; cannot populate tables".into(),
                ))
            }
        }
    }
    Ok(order)
}
