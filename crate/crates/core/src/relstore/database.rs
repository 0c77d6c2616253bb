use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::schema::Schema;
use crate::error::{Error, Result};
use crate::query::ColumnRef;

/// Exact per-column statistics over the stored rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnStats {
    /// `None` when the table is empty.
    pub min: Option<i64>,
    pub max: Option<i64>,
    pub rows: u64,
    pub distinct: u64,
}

/// An immutable in-memory database instance.
#[derive(Debug, Clone)]
pub struct Database {
    schema: Schema,
    /// Rows per table, indexed like `schema.tables`.
    rows: Vec<Vec<Vec<i64>>>,
    /// Indices of the first occurrence of every distinct row, per table.
    distinct_rows: Vec<Vec<u32>>,
    stats: BTreeMap<ColumnRef, ColumnStats>,
}

impl Database {
    /// Builds a database from explicit rows. Tables absent from `rows` are empty.
    pub fn new(schema: Schema, mut rows: BTreeMap<String, Vec<Vec<i64>>>) -> Result<Self> {
        schema.validate()?;
        if let Some(extra) = rows.keys().find(|t| schema.table(t).is_none()) {
            return Err(Error::Schema(format!("rows given for unknown table `{extra}`")));
        }
        let mut per_table = Vec::with_capacity(schema.tables.len());
        for t in &schema.tables {
            let table_rows = rows.remove(&t.name).unwrap_or_default();
            for (i, row) in table_rows.iter().enumerate() {
                if row.len() != t.width() {
                    return Err(Error::Schema(format!(
                        "row {i} of `{}` has {} values, expected {}",
                        t.name,
                        row.len(),
                        t.width()
                    )));
                }
                for (j, c) in t.cols.iter().enumerate() {
                    let v = row[t.key_cols.len() + j];
                    if v < c.min || v > c.max {
                        return Err(Error::Schema(format!(
                            "value {v} of `{}.{}` in row {i} outside [{}, {}]",
                            t.name, c.name, c.min, c.max
                        )));
                    }
                }
            }
            per_table.push(table_rows);
        }

        let distinct_rows = per_table
            .iter()
            .map(|rows| {
                let mut seen = HashSet::with_capacity(rows.len());
                (0..rows.len() as u32)
                    .filter(|&i| seen.insert(&rows[i as usize]))
                    .collect()
            })
            .collect();

        let mut stats = BTreeMap::new();
        for (t, rows) in schema.tables.iter().zip(&per_table) {
            for (pos, name) in t.column_names().enumerate() {
                let values: BTreeSet<i64> = rows.iter().map(|r| r[pos]).collect();
                stats.insert(
                    ColumnRef::new(&t.name, name),
                    ColumnStats {
                        min: values.first().copied(),
                        max: values.last().copied(),
                        rows: rows.len() as u64,
                        distinct: values.len() as u64,
                    },
                );
            }
        }

        Ok(Database {
            schema,
            rows: per_table,
            distinct_rows,
            stats,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self, table: &str) -> Option<&[Vec<i64>]> {
        let i = self.schema.table_index(table)?;
        Some(&self.rows[i])
    }

    pub(crate) fn rows_at(&self, table_index: usize) -> &[Vec<i64>] {
        &self.rows[table_index]
    }

    pub(crate) fn distinct_rows_at(&self, table_index: usize) -> &[u32] {
        &self.distinct_rows[table_index]
    }

    pub fn row_count(&self, table: &str) -> Option<usize> {
        self.rows(table).map(<[_]>::len)
    }

    pub fn total_rows(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn column_stats(&self, c: &ColumnRef) -> Option<&ColumnStats> {
        self.stats.get(c)
    }

    pub fn all_column_stats(&self) -> &BTreeMap<ColumnRef, ColumnStats> {
        &self.stats
    }

    /// Range that predicate values for `c` are drawn from: the stored
    /// min/max, or the declared range when the table is empty.
    pub fn value_range(&self, c: &ColumnRef) -> Option<(i64, i64)> {
        let s = self.stats.get(c)?;
        match (s.min, s.max) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            _ => self.schema.column_def(c).map(|d| (d.min, d.max)),
        }
    }
}

impl PartialEq for Database {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema && self.rows == other.rows
    }
}
