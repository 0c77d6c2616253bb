//! Cardinality and containment estimators and the transformations between
//! them.
//!
//! [`Crd2Cnt`] turns a cardinality estimator into a containment estimator via
//! `|Q1 ∩ Q2| / |Q1|`. [`estimate_cardinality`] goes the other way: each
//! same-FROM record `(Q_old, |Q_old|)` of a [`QueriesPool`] yields the
//! estimate `rate(Q_old, Q_new) / rate(Q_new, Q_old) · |Q_old|`, and a final
//! function collapses the per-record estimates.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crn::Crn;
use crate::error::{Error, Result};
use crate::qgen::LabeledQuery;
use crate::query::{intersect, same_from, Op, Query};
use crate::relstore::{cardinality, true_containment_rate, ColumnStats, Database};

pub trait CardinalityEstimator {
    /// Estimated `|q(D)|`; finite and non-negative.
    fn estimate(&self, q: &Query) -> Result<f64>;
}

pub trait ContainmentEstimator {
    /// Estimated fraction of `q1`'s result contained in `q2`'s result.
    fn rate(&self, q1: &Query, q2: &Query) -> Result<f64>;
}

impl<T: CardinalityEstimator + ?Sized> CardinalityEstimator for &T {
    fn estimate(&self, q: &Query) -> Result<f64> {
        (**self).estimate(q)
    }
}

impl<T: CardinalityEstimator + ?Sized> CardinalityEstimator for Box<T> {
    fn estimate(&self, q: &Query) -> Result<f64> {
        (**self).estimate(q)
    }
}

impl<T: ContainmentEstimator + ?Sized> ContainmentEstimator for &T {
    fn rate(&self, q1: &Query, q2: &Query) -> Result<f64> {
        (**self).rate(q1, q2)
    }
}

impl<T: ContainmentEstimator + ?Sized> ContainmentEstimator for Box<T> {
    fn rate(&self, q1: &Query, q2: &Query) -> Result<f64> {
        (**self).rate(q1, q2)
    }
}

fn check_same_from(q1: &Query, q2: &Query) -> Result<()> {
    if same_from(q1, q2) {
        Ok(())
    } else {
        Err(Error::ContainmentDomain(format!(
            "FROM clauses differ: {{{}}} vs {{{}}}",
            q1.from_key(),
            q2.from_key()
        )))
    }
}

/// Exact cardinalities from the executor.
#[derive(Debug, Clone, Copy)]
pub struct ExactCardinality<'a>(pub &'a Database);

impl CardinalityEstimator for ExactCardinality<'_> {
    fn estimate(&self, q: &Query) -> Result<f64> {
        Ok(cardinality(q, self.0)? as f64)
    }
}

/// Exact containment rates from the executor.
#[derive(Debug, Clone, Copy)]
pub struct ExactContainment<'a>(pub &'a Database);

impl ContainmentEstimator for ExactContainment<'_> {
    fn rate(&self, q1: &Query, q2: &Query) -> Result<f64> {
        true_containment_rate(q1, q2, self.0)
    }
}

/// The same estimate for every query.
#[derive(Debug, Clone, Copy)]
pub struct ConstantCardinality(pub f64);

impl CardinalityEstimator for ConstantCardinality {
    fn estimate(&self, _q: &Query) -> Result<f64> {
        Ok(self.0)
    }
}

/// The same rate for every same-FROM pair.
#[derive(Debug, Clone, Copy)]
pub struct ConstantContainment(pub f64);

impl ContainmentEstimator for ConstantContainment {
    fn rate(&self, q1: &Query, q2: &Query) -> Result<f64> {
        check_same_from(q1, q2)?;
        Ok(self.0)
    }
}

impl ContainmentEstimator for Crn {
    fn rate(&self, q1: &Query, q2: &Query) -> Result<f64> {
        self.predict(q1, q2)
    }
}

/// Containment through a cardinality model: `M(q1 ∩ q2) / M(q1)`, or 0 when
/// `M(q1) = 0`. Rates above 1 from inexact models are passed through.
#[derive(Debug, Clone, Copy)]
pub struct Crd2Cnt<M>(pub M);

impl<M: CardinalityEstimator> ContainmentEstimator for Crd2Cnt<M> {
    fn rate(&self, q1: &Query, q2: &Query) -> Result<f64> {
        check_same_from(q1, q2)?;
        let base = self.0.estimate(q1)?;
        if base == 0.0 {
            return Ok(0.0);
        }
        Ok(self.0.estimate(&intersect(q1, q2)?)? / base)
    }
}

/// Per-column statistics for the independence baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStatsModel {
    pub table_rows: BTreeMap<String, u64>,
    pub columns: BTreeMap<crate::query::ColumnRef, ColumnStats>,
}

impl ColumnStatsModel {
    pub fn from_database(db: &Database) -> Self {
        ColumnStatsModel {
            table_rows: db
                .schema()
                .tables
                .iter()
                .map(|t| (t.name.clone(), db.row_count(&t.name).unwrap_or(0) as u64))
                .collect(),
            columns: db.all_column_stats().clone(),
        }
    }
}

fn predicate_selectivity(s: &ColumnStats, op: Op, v: i64) -> f64 {
    let (Some(lo), Some(hi)) = (s.min, s.max) else {
        return 0.0;
    };
    let span = (hi - lo + 1) as f64;
    match op {
        Op::Eq => {
            if s.distinct == 0 {
                0.0
            } else {
                1.0 / s.distinct as f64
            }
        }
        // Integers of [lo, hi] strictly below / above v.
        Op::Lt => ((v as i128 - lo as i128).clamp(0, span as i128)) as f64 / span,
        Op::Gt => ((hi as i128 - v as i128).clamp(0, span as i128)) as f64 / span,
    }
}

/// Uniformity-and-independence estimate: base-table sizes times per-predicate
/// and per-join selectivities, floored at 1.
pub fn independence_estimate(q: &Query, stats: &ColumnStatsModel) -> Result<f64> {
    let mut est = 1.0;
    for t in q.tables() {
        let rows = stats
            .table_rows
            .get(t)
            .ok_or_else(|| Error::Query(format!("unknown table `{t}`")))?;
        est *= *rows as f64;
    }
    let col = |c: &crate::query::ColumnRef| {
        stats
            .columns
            .get(c)
            .ok_or_else(|| Error::Query(format!("unknown column `{c}`")))
    };
    for p in q.preds() {
        est *= predicate_selectivity(col(&p.column)?, p.op, p.value);
    }
    for j in q.joins() {
        let d = col(j.left())?.distinct.max(col(j.right())?.distinct);
        if d > 0 {
            est /= d as f64;
        }
    }
    Ok(est.max(1.0))
}

impl CardinalityEstimator for ColumnStatsModel {
    fn estimate(&self, q: &Query) -> Result<f64> {
        independence_estimate(q, self)
    }
}

/// Aggregator over the per-record estimates of one query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
#[derive(Default)]
pub enum FinalFn {
    #[default]
    Median,
    Mean,
    /// Drops `⌈per_tail·n⌉` values from each end (keeping at least one) and
    /// averages the rest.
    TrimmedMean {
        per_tail: f64,
    },
}

impl FinalFn {
    pub const DEFAULT_TRIM: f64 = 0.125;

    pub fn trimmed_mean() -> Self {
        FinalFn::TrimmedMean {
            per_tail: Self::DEFAULT_TRIM,
        }
    }
}

impl fmt::Display for FinalFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FinalFn::Median => f.write_str("median"),
            FinalFn::Mean => f.write_str("mean"),
            FinalFn::TrimmedMean { per_tail } if *per_tail == Self::DEFAULT_TRIM => f.write_str("trimmed-mean"),
            FinalFn::TrimmedMean { per_tail } => write!(f, "trimmed-mean:{per_tail}"),
        }
    }
}

impl FromStr for FinalFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(FinalFn::Median),
            "mean" => Ok(FinalFn::Mean),
            "trimmed-mean" => Ok(FinalFn::trimmed_mean()),
            _ => {
                let per_tail = s
                    .strip_prefix("trimmed-mean:")
                    .and_then(|x| x.parse::<f64>().ok())
                    .filter(|x| (0.0..0.5).contains(x))
                    .ok_or_else(|| Error::Query(format!("unknown final function `{s}`")))?;
                Ok(FinalFn::TrimmedMean { per_tail })
            }
        }
    }
}

impl TryFrom<String> for FinalFn {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FinalFn> for String {
    fn from(f: FinalFn) -> String {
        f.to_string()
    }
}

/// Collapses `results` with `kind`; `None` for an empty list. Values are
/// sorted first, so the answer does not depend on their order.
pub fn final_fn(results: &[f64], kind: FinalFn) -> Option<f64> {
    if results.is_empty() {
        return None;
    }
    let mut v = results.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Some(match kind {
        FinalFn::Median if n % 2 == 1 => v[n / 2],
        FinalFn::Median => (v[n / 2 - 1] + v[n / 2]) / 2.0,
        FinalFn::Mean => mean(&v),
        FinalFn::TrimmedMean { per_tail } => {
            let k = ((per_tail * n as f64).ceil() as usize).min((n - 1) / 2);
            mean(&v[k..n - k])
        }
    })
}

/// Previously executed queries with their true cardinalities, indexed by FROM
/// clause.
#[derive(Debug, Clone, PartialEq)]
pub struct QueriesPool {
    records: Vec<LabeledQuery>,
    index: BTreeMap<String, Vec<usize>>,
    /// Records whose `rate(Q_new, Q_old)` is at most this are skipped.
    pub epsilon: f64,
    pub final_fn: FinalFn,
}

impl QueriesPool {
    pub const DEFAULT_EPSILON: f64 = 0.01;

    pub fn new(records: Vec<LabeledQuery>, epsilon: f64, final_fn: FinalFn) -> Self {
        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            index.entry(r.query.from_key()).or_default().push(i);
        }
        QueriesPool {
            records,
            index,
            epsilon,
            final_fn,
        }
    }

    pub fn records(&self) -> &[LabeledQuery] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records sharing `q`'s FROM clause, in insertion order.
    pub fn same_from<'a>(&'a self, q: &Query) -> impl Iterator<Item = &'a LabeledQuery> + 'a {
        self.index
            .get(&q.from_key())
            .into_iter()
            .flatten()
            .map(|&i| &self.records[i])
    }

    /// Record count per FROM key.
    pub fn bucket_sizes(&self) -> BTreeMap<String, usize> {
        self.index.iter().map(|(k, v)| (k.clone(), v.len())).collect()
    }

    /// Adds a predicate-free record for every connected FROM clause of the
    /// schema with at most `max_tables` tables that does not already have one.
    pub fn add_coverage(&mut self, db: &Database, max_tables: usize) -> Result<()> {
        for tables in db.schema().connected_table_sets(max_tables) {
            let q = Query::new(tables.iter().cloned(), db.schema().joins_within(&tables), [])?;
            if self.same_from(&q).any(|r| r.query.preds().is_empty()) {
                continue;
            }
            let card = cardinality(&q, db)?;
            self.index.entry(q.from_key()).or_default().push(self.records.len());
            self.records.push(LabeledQuery { query: q, card });
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, schema_hash: &str) -> Result<()> {
        let path = path.as_ref();
        let header = PoolHeader {
            kind: "pool".into(),
            epsilon: self.epsilon,
            final_fn: self.final_fn,
            schema_hash: schema_hash.into(),
            count: self.records.len(),
        };
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(PoolHeader, QueriesPool)> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(f).lines();
        let bad = |reason: String| Error::Format {
            path: path.into(),
            reason,
        };
        let first = lines
            .next()
            .ok_or_else(|| bad("empty pool file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: PoolHeader = serde_json::from_str(&first)?;
        if header.kind != "pool" {
            return Err(bad(format!("expected a pool file, found `{}`", header.kind)));
        }
        let mut records = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if !line.trim().is_empty() {
                records.push(serde_json::from_str::<LabeledQuery>(&line)?);
            }
        }
        if records.len() != header.count {
            return Err(bad(format!(
                "header announces {} records, found {}",
                header.count,
                records.len()
            )));
        }
        let pool = QueriesPool::new(records, header.epsilon, header.final_fn);
        Ok((header, pool))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolHeader {
    pub kind: String,
    pub epsilon: f64,
    pub final_fn: FinalFn,
    pub schema_hash: String,
    pub count: usize,
}

/// `rate(rec, q_new) / rate(q_new, rec) · |rec|`, or `None` when
/// `rate(q_new, rec) ≤ 0`.
pub fn cnt2crd_single<R: ContainmentEstimator + ?Sized>(
    rate_model: &R,
    q_new: &Query,
    rec: &LabeledQuery,
) -> Result<Option<f64>> {
    check_same_from(q_new, &rec.query)?;
    let y = rate_model.rate(q_new, &rec.query)?;
    if y <= 0.0 {
        return Ok(None);
    }
    let x = rate_model.rate(&rec.query, q_new)?;
    Ok(Some(x / y * rec.card as f64))
}

/// Per-record estimates for `q_new`, in pool order, skipping records whose
/// `rate(q_new, rec)` is at most the pool's epsilon.
pub fn pool_estimates<R: ContainmentEstimator + ?Sized>(
    q_new: &Query,
    pool: &QueriesPool,
    rate_model: &R,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for rec in pool.same_from(q_new) {
        let y = rate_model.rate(q_new, &rec.query)?;
        if y <= pool.epsilon {
            continue;
        }
        let x = rate_model.rate(&rec.query, q_new)?;
        out.push(x / y * rec.card as f64);
    }
    Ok(out)
}

/// Cardinality of `q_new` through the pool, or `fallback`'s estimate when no
/// record applies.
pub fn estimate_cardinality<R, F>(q_new: &Query, pool: &QueriesPool, rate_model: &R, fallback: &F) -> Result<f64>
where
    R: ContainmentEstimator + ?Sized,
    F: CardinalityEstimator + ?Sized,
{
    let results = pool_estimates(q_new, pool, rate_model)?;
    match final_fn(&results, pool.final_fn) {
        Some(v) => Ok(v),
        None => fallback.estimate(q_new),
    }
}

/// A containment model turned into a cardinality model through a pool.
#[derive(Debug, Clone)]
pub struct PoolEstimator<'p, R, F> {
    pub pool: &'p QueriesPool,
    pub rate_model: R,
    pub fallback: F,
}

impl<'p, R: ContainmentEstimator, F: CardinalityEstimator> PoolEstimator<'p, R, F> {
    pub fn new(pool: &'p QueriesPool, rate_model: R, fallback: F) -> Self {
        PoolEstimator {
            pool,
            rate_model,
            fallback,
        }
    }
}

impl<R: ContainmentEstimator, F: CardinalityEstimator> CardinalityEstimator for PoolEstimator<'_, R, F> {
    fn estimate(&self, q: &Query) -> Result<f64> {
        estimate_cardinality(q, self.pool, &self.rate_model, &self.fallback)
    }
}

/// `M` upgraded through its own containment rates: the pool estimator with
/// rate model `Crd2Cnt(M)` and fallback `M`.
pub fn improved<'a, M: CardinalityEstimator>(
    pool: &'a QueriesPool,
    m: &'a M,
) -> PoolEstimator<'a, Crd2Cnt<&'a M>, &'a M> {
    PoolEstimator::new(pool, Crd2Cnt(m), m)
}
