//! q-error statistics and workload evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crn::qerror;
use crate::error::{Error, Result};
use crate::estimators::{CardinalityEstimator, ContainmentEstimator};
use crate::qgen::{LabeledPair, LabeledQuery};

/// Nearest-rank percentile: the `⌈p/100·n⌉`-th smallest value. `None` for an
/// empty list or `p` outside `(0, 100]`.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(p > 0.0 && p <= 100.0) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(nearest_rank(&v, p))
}

fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// q-error of a cardinality estimate with both sides floored at 1.
pub fn cardinality_qerror(estimate: f64, truth: f64) -> f64 {
    let (e, t) = (estimate.max(1.0), truth.max(1.0));
    if e > t {
        e / t
    } else {
        t / e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QErrorStats {
    pub p50: f64,
    pub p75: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
    pub mean: f64,
    pub n: usize,
}

impl QErrorStats {
    /// `None` for an empty sample.
    pub fn from_qerrors(qerrors: &[f64]) -> Option<Self> {
        if qerrors.is_empty() {
            return None;
        }
        let mut v = qerrors.to_vec();
        v.sort_by(f64::total_cmp);
        Some(QErrorStats {
            p50: nearest_rank(&v, 50.0),
            p75: nearest_rank(&v, 75.0),
            p90: nearest_rank(&v, 90.0),
            p95: nearest_rank(&v, 95.0),
            p99: nearest_rank(&v, 99.0),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
            n: v.len(),
        })
    }

    /// `p50 ≤ p75 ≤ p90 ≤ p95 ≤ p99 ≤ max`.
    pub fn is_ordered(&self) -> bool {
        self.p50 <= self.p75
            && self.p75 <= self.p90
            && self.p90 <= self.p95
            && self.p95 <= self.p99
            && self.p99 <= self.max
    }
}

/// Statistics per join count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinBreakdown(pub BTreeMap<usize, QErrorStats>);

impl JoinBreakdown {
    fn from_samples(samples: &[Sample]) -> Self {
        let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for s in samples {
            groups.entry(s.joins).or_default().push(s.qerror);
        }
        JoinBreakdown(
            groups
                .into_iter()
                .map(|(j, q)| (j, QErrorStats::from_qerrors(&q).expect("nonempty group")))
                .collect(),
        )
    }

    pub fn get(&self, joins: usize) -> Option<&QErrorStats> {
        self.0.get(&joins)
    }
}

/// One evaluated workload item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub joins: usize,
    pub truth: f64,
    pub estimate: f64,
    pub qerror: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub overall: QErrorStats,
    pub by_joins: JoinBreakdown,
    pub samples: Vec<Sample>,
}

impl Evaluation {
    fn from_samples(samples: Vec<Sample>) -> Result<Self> {
        let q: Vec<f64> = samples.iter().map(|s| s.qerror).collect();
        let overall = QErrorStats::from_qerrors(&q).ok_or_else(|| Error::Query("empty workload".into()))?;
        Ok(Evaluation {
            overall,
            by_joins: JoinBreakdown::from_samples(&samples),
            samples,
        })
    }
}

/// Containment q-errors with labels floored at `label_floor`; a pair's join
/// count is that of its first query.
pub fn eval_containment<R: ContainmentEstimator + ?Sized>(
    model: &R,
    workload: &[LabeledPair],
    label_floor: f64,
) -> Result<Evaluation> {
    let samples = workload
        .iter()
        .map(|p| {
            let est = model.rate(&p.q1, &p.q2)?;
            Ok(Sample {
                joins: p.q1.join_count(),
                truth: p.rate,
                estimate: est,
                qerror: qerror(p.rate, est, label_floor),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Evaluation::from_samples(samples)
}

/// Cardinality q-errors with estimate and truth floored at 1.
pub fn eval_cardinality<E: CardinalityEstimator + ?Sized>(est: &E, workload: &[LabeledQuery]) -> Result<Evaluation> {
    let samples = workload
        .iter()
        .map(|q| {
            let e = est.estimate(&q.query)?;
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::Numeric(format!("estimate {e} for {}", q.query)));
            }
            let truth = q.card as f64;
            Ok(Sample {
                joins: q.query.join_count(),
                truth,
                estimate: e,
                qerror: cardinality_qerror(e, truth),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Evaluation::from_samples(samples)
}

pub const RESULTS_HEADER: [&str; 11] = [
    "workload", "model", "joins", "p50", "p75", "p90", "p95", "p99", "max", "mean", "n",
];

/// One CSV row; `joins` is `all` for the whole workload.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub workload: String,
    pub model: String,
    pub joins: String,
    pub stats: QErrorStats,
}

impl ResultRow {
    fn record(&self) -> Vec<String> {
        let s = &self.stats;
        let mut r = vec![self.workload.clone(), self.model.clone(), self.joins.clone()];
        r.extend(
            [s.p50, s.p75, s.p90, s.p95, s.p99, s.max, s.mean]
                .iter()
                .map(f64::to_string),
        );
        r.push(s.n.to_string());
        r
    }
}

/// The `all` row followed by one row per join count.
pub fn result_rows(workload: &str, model: &str, eval: &Evaluation) -> Vec<ResultRow> {
    let row = |joins: String, stats: QErrorStats| ResultRow {
        workload: workload.into(),
        model: model.into(),
        joins,
        stats,
    };
    let mut rows = vec![row("all".into(), eval.overall)];
    rows.extend(eval.by_joins.0.iter().map(|(j, s)| row(j.to_string(), *s)));
    rows
}

pub fn write_results_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-item q-errors for box plots.
pub fn write_samples_csv(path: impl AsRef<Path>, workload: &str, model: &str, samples: &[Sample]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["workload", "model", "index", "joins", "truth", "estimate", "qerror"])?;
    for (i, s) in samples.iter().enumerate() {
        w.write_record([
            workload.to_string(),
            model.to_string(),
            i.to_string(),
            s.joins.to_string(),
            s.truth.to_string(),
            s.estimate.to_string(),
            s.qerror.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
