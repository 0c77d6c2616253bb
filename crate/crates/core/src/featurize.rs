//! Query featurization as a set of equally-wide, segmented vectors.
//!
//! Every vector has width `L = #T + 3·#C + #O + 1` and is laid out as
//! `[T-seg | J1-seg | J2-seg | C-seg | O-seg | V-seg]` with segment sizes
//! `#T, #C, #C, #C, #O, 1`. A table sets one bit in T-seg, a join sets one bit
//! in each of J1-seg and J2-seg, and a predicate sets one bit in C-seg, one in
//! O-seg and writes its normalized literal into V-seg.
//!
//! Vectors hold at most three non-zeros, so they are stored sparsely.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::{ColumnRef, Op, Query};
use crate::relstore::Schema;

pub const OP_COUNT: usize = Op::ALL.len();

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub schema_hash: String,
    pub tables: Vec<String>,
    pub columns: Vec<ColumnRef>,
    /// Declared `(min, max)` per column; `None` for key columns.
    pub ranges: Vec<Option<(i64, i64)>>,
    #[serde(skip)]
    table_index: BTreeMap<String, usize>,
    #[serde(skip)]
    column_index: BTreeMap<ColumnRef, usize>,
}

impl FeatureSpace {
    pub fn new(schema: &Schema) -> Self {
        let mut tables: Vec<String> = schema.tables.iter().map(|t| t.name.clone()).collect();
        tables.sort();
        let columns = schema.all_columns();
        let ranges = columns
            .iter()
            .map(|c| schema.column_def(c).map(|d| (d.min, d.max)))
            .collect();
        FeatureSpace {
            schema_hash: schema.hash(),
            tables,
            columns,
            ranges,
            table_index: BTreeMap::new(),
            column_index: BTreeMap::new(),
        }
        .indexed()
    }

    /// Rebuilds the lookup maps; call after deserializing.
    pub fn indexed(mut self) -> Self {
        self.table_index = self.tables.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        self.column_index = self.columns.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        self
    }

    pub fn table_count(&self) -> usize {
        self.tables.len()
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    /// Vector width `L`.
    pub fn width(&self) -> usize {
        self.table_count() + 3 * self.column_count() + OP_COUNT + 1
    }

    pub fn t_seg(&self) -> Range<usize> {
        0..self.table_count()
    }

    pub fn j1_seg(&self) -> Range<usize> {
        let s = self.t_seg().end;
        s..s + self.column_count()
    }

    pub fn j2_seg(&self) -> Range<usize> {
        let s = self.j1_seg().end;
        s..s + self.column_count()
    }

    pub fn c_seg(&self) -> Range<usize> {
        let s = self.j2_seg().end;
        s..s + self.column_count()
    }

    pub fn o_seg(&self) -> Range<usize> {
        let s = self.c_seg().end;
        s..s + OP_COUNT
    }

    pub fn v_seg(&self) -> Range<usize> {
        let s = self.o_seg().end;
        s..s + 1
    }

    pub fn table_idx(&self, t: &str) -> Result<usize> {
        self.table_index
            .get(t)
            .copied()
            .ok_or_else(|| Error::Featurization(format!("unknown table `{t}`")))
    }

    pub fn column_idx(&self, c: &ColumnRef) -> Result<usize> {
        self.column_index
            .get(c)
            .copied()
            .ok_or_else(|| Error::Featurization(format!("unknown column `{c}`")))
    }

    /// Min-max normalization into `[0, 1]`; a degenerate range maps to 0.5.
    pub fn normalize_value(&self, c: &ColumnRef, v: i64) -> Result<f64> {
        let (lo, hi) = self.ranges[self.column_idx(c)?]
            .ok_or_else(|| Error::Featurization(format!("key column `{c}` has no value range")))?;
        if lo == hi {
            return Ok(0.5);
        }
        Ok(((v - lo) as f64 / (hi - lo) as f64).clamp(0.0, 1.0))
    }

    pub fn featurize(&self, q: &Query) -> Result<VectorSet> {
        let mut vectors = Vec::with_capacity(q.tables().len() + q.joins().len() + q.preds().len());
        for t in q.tables() {
            vectors.push(FeatureVector::new(vec![(self.t_seg().start + self.table_idx(t)?, 1.0)]));
        }
        for j in q.joins() {
            vectors.push(FeatureVector::new(vec![
                (self.j1_seg().start + self.column_idx(j.left())?, 1.0),
                (self.j2_seg().start + self.column_idx(j.right())?, 1.0),
            ]));
        }
        for p in q.preds() {
            vectors.push(FeatureVector::new(vec![
                (self.c_seg().start + self.column_idx(&p.column)?, 1.0),
                (self.o_seg().start + p.op.index(), 1.0),
                (self.v_seg().start, self.normalize_value(&p.column, p.value)?),
            ]));
        }
        Ok(VectorSet::new(self.width(), vectors))
    }
}

/// A sparse vector: strictly increasing indices with their values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn new(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        FeatureVector { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self, width: usize) -> Vec<f64> {
        let mut v = vec![0.0; width];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.entries.iter().zip(&other.entries) {
            let o = a.0.cmp(&b.0).then_with(|| a.1.total_cmp(&b.1));
            if o != Ordering::Equal {
                return o;
            }
        }
        self.entries.len().cmp(&other.entries.len())
    }
}

/// The vectors representing one query, kept in a canonical sorted order so
/// that pooling sums them in the same order regardless of input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSet {
    width: usize,
    vectors: Vec<FeatureVector>,
}

impl VectorSet {
    pub fn new(width: usize, mut vectors: Vec<FeatureVector>) -> Self {
        vectors.sort_by(FeatureVector::total_cmp);
        VectorSet { width, vectors }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn vectors(&self) -> &[FeatureVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.vectors.iter().map(|v| v.to_dense(self.width)).collect()
    }
}
