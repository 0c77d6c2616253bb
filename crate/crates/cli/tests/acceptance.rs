//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that the lines appear in plain
//! `cargo test` output. Every threshold and size is a constant below.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use crn_core::crn::{self, loss_and_grad, mean_loss, Checkpoint, Crn, CrnParams, TrainConfig, TrainReport};
use crn_core::estimators::{
    cnt2crd_single, final_fn, improved, CardinalityEstimator, ColumnStatsModel, Crd2Cnt, ExactCardinality, FinalFn,
    PoolEstimator, QueriesPool,
};
use crn_core::eval::{cardinality_qerror, eval_cardinality, eval_containment, percentile, Evaluation, QErrorStats};
use crn_core::featurize::{FeatureSpace, FeatureVector, VectorSet};
use crn_core::qgen::{self, gen_query_for_tables, GenConfig, LabeledPair, LabeledQuery};
use crn_core::query::{ColumnRef, Op, Query};
use crn_core::relstore::{build_database, true_containment_rate, Database, Schema};
use crn_core::seed;
use rand::Rng;

/// Root seed of every randomized criterion.
const ROOT_SEED: u64 = 7;

// A1
const A1_QUERIES: usize = 200;
const A1_MAX_JOINS: usize = 3;
const A1_MAX_ROWS: usize = 5_000;
const A1_REL_TOL: f64 = 1e-9;
const A1_BUDGET: Duration = Duration::from_secs(60);

// A2
const A2_MAX_ROWS: usize = 1_000;
const A2_QUERIES_PER_FROM: usize = 8;
const A2_BUDGET: Duration = Duration::from_secs(120);

// A3
const A3_CONFIGS: usize = 20;
const A3_MAX_L: usize = 20;
const A3_MAX_H: usize = 8;
const A3_REL_TOL: f64 = 1e-4;
/// Denominator floor of the relative error, for gradients that vanish.
const A3_REL_FLOOR: f64 = 1e-6;

// A4
const A4_PAIRS: usize = 5_000;
const A4_MAX_JOINS: usize = 2;
const A4_HIDDEN: usize = 64;
const A4_BATCH: usize = 128;
const A4_LR: f64 = 1e-3;
const A4_MAX_EPOCHS: usize = 300;
const A4_PATIENCE: usize = 40;
const A4_MIN_REDUCTION: f64 = 5.0;
const A4_MAX_MEDIAN: f64 = 4.5;
const A4_BUDGET: Duration = Duration::from_secs(600);

// A5, A7
const CRD_QUERIES: usize = 400;
const CRD_MAX_JOINS: usize = 3;
const POOL_QUERIES: usize = 300;
/// Joins of the slice A7 compares on: queries with more than one join.
const A7_MIN_JOINS: usize = 2;

// A6
const A6_CONFIGS: usize = 10;

// A8
const A8_FUZZ_CASES: usize = 2_000;

fn main() {
    type Criterion = (&'static str, &'static str, fn() -> Verdict);
    let criteria: [Criterion; 9] = [
        ("A1", "round-trip exactness", a1),
        ("A2", "oracle equivalence", a2),
        ("A3", "gradient correctness", a3),
        ("A4", "training convergence", a4),
        ("A5", "multi-join superiority", a5),
        ("A6", "parameter-count identity", a6),
        ("A7", "improved-M construction", a7),
        ("A8", "statistics unit suite", a8),
        ("A9", "determinism", a9),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('A')).collect();
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::fail(format!("panicked: {msg}"))
        });
        println!(
            "{id} {name}: {} ({}; {:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {}", failed.join(", "));
        if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Verdict { pass, detail }
    }

    fn fail(detail: String) -> Self {
        Verdict { pass: false, detail }
    }
}

fn counts(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
    pairs.iter().map(|&(t, n)| (t.to_string(), n)).collect()
}

fn median_of(ev: &Evaluation, joins: usize) -> f64 {
    ev.by_joins.get(joins).expect("workload covers the join count").p50
}

// ---------------------------------------------------------------- A1

fn a1() -> Verdict {
    let start = Instant::now();
    let rows = counts(&[
        ("title", 500),
        ("cast_info", 1500),
        ("movie_companies", 1000),
        ("movie_keyword", 1000),
    ]);
    let total: usize = rows.values().sum();
    assert!(total <= A1_MAX_ROWS);
    let db = build_database(&Schema::movies(), &rows, seed::substream(ROOT_SEED, "db")).unwrap();
    let cfg = GenConfig {
        max_joins: A1_MAX_JOINS,
        seed: ROOT_SEED,
        ..GenConfig::default()
    };
    let mut rng = seed::sub_rng(ROOT_SEED, "gen");
    let workload = qgen::generate_queries(&cfg, &db, A1_QUERIES, &mut rng).unwrap();
    let mut pool = QueriesPool::new(
        qgen::generate_pool_queries(&cfg, &db, 100, &mut rng).unwrap(),
        QueriesPool::DEFAULT_EPSILON,
        FinalFn::Median,
    );
    pool.add_coverage(&db, A1_MAX_JOINS + 1).unwrap();

    let rates = Crd2Cnt(ExactCardinality(&db));
    let base = ColumnStatsModel::from_database(&db);
    let est = PoolEstimator::new(&pool, &rates, &base);
    let (mut applicable, mut exact) = (0, 0);
    let mut worst: f64 = 1.0;
    for w in &workload {
        let has_record = pool
            .same_from(&w.query)
            .any(|r| cnt2crd_single(&rates, &w.query, r).unwrap().is_some());
        if has_record {
            applicable += 1;
            let q = cardinality_qerror(est.estimate(&w.query).unwrap(), w.card as f64);
            worst = worst.max(q);
            if (q - 1.0).abs() <= A1_REL_TOL {
                exact += 1;
            }
        }
    }
    // the same check through the command line runner
    let cli = crn_cli::run([
        "crn",
        "--seed",
        "7",
        "round-trip-check",
        "--n",
        "200",
        "--max-joins",
        "3",
    ]);
    let elapsed = start.elapsed();
    let joins: BTreeSet<usize> = workload.iter().map(|w| w.query.join_count()).collect();
    Verdict::new(
        applicable > 0 && exact == applicable && cli.is_ok() && elapsed < A1_BUDGET && joins.len() == A1_MAX_JOINS + 1,
        format!(
            "{exact}/{applicable} applicable of {} queries exact within {A1_REL_TOL:e}, worst q-error {worst}, \
             {total} rows, join counts {joins:?}, cli runner {}",
            workload.len(),
            if cli.is_ok() { "ok" } else { "failed" }
        ),
    )
}

// ---------------------------------------------------------------- A2

/// Result tuples by nested loops over full rows; joins and predicates are
/// tested once every table they mention is bound.
fn brute_force(q: &Query, db: &Database) -> BTreeSet<Vec<i64>> {
    let schema = db.schema();
    let names = q.tables();
    let depth = |c: &ColumnRef| names.iter().position(|t| *t == c.table).unwrap();
    let offset = |c: &ColumnRef| {
        names[..depth(c)]
            .iter()
            .map(|t| schema.table(t).unwrap().width())
            .sum::<usize>()
            + schema.table(&c.table).unwrap().position(&c.column).unwrap()
    };
    let mut joins = vec![Vec::new(); names.len()];
    for j in q.joins() {
        joins[depth(j.left()).max(depth(j.right()))].push((offset(j.left()), offset(j.right())));
    }
    let mut preds = vec![Vec::new(); names.len()];
    for p in q.preds() {
        preds[depth(&p.column)].push((offset(&p.column), p.op, p.value));
    }
    let tables: Vec<&[Vec<i64>]> = names.iter().map(|t| db.rows(t).unwrap()).collect();
    let mut out = BTreeSet::new();
    let mut stack = vec![(0usize, 0usize, Vec::<i64>::new())];
    // explicit stack: (depth, next row index, tuple so far)
    while let Some((d, i, tuple)) = stack.pop() {
        if d == tables.len() {
            out.insert(tuple);
            continue;
        }
        if i == tables[d].len() {
            continue;
        }
        stack.push((d, i + 1, tuple.clone()));
        let mut t = tuple;
        t.extend_from_slice(&tables[d][i]);
        let ok = joins[d].iter().all(|&(a, b)| t[a] == t[b])
            && preds[d]
                .iter()
                .all(|&(pos, op, v): &(usize, Op, i64)| op.eval(t[pos], v));
        if ok {
            stack.push((d + 1, 0, t));
        }
    }
    out
}

fn a2() -> Verdict {
    let start = Instant::now();
    let schema = Schema::from_json(
        r#"{"tables":[
            {"name":"A","key_cols":["id"],"cols":[{"name":"x","min":0,"max":9},{"name":"w","min":0,"max":3}]},
            {"name":"B","key_cols":["id","a_id"],"cols":[{"name":"y","min":0,"max":9}]},
            {"name":"C","key_cols":["id","b_id"],"cols":[{"name":"z","min":0,"max":5}]}],
          "join_edges":[["A.id","B.a_id"],["B.id","C.b_id"]]}"#,
    )
    .unwrap();
    let rows = counts(&[("A", 100), ("B", 300), ("C", 600)]);
    let total: usize = rows.values().sum();
    assert!(total <= A2_MAX_ROWS);
    let db = build_database(&schema, &rows, seed::substream(ROOT_SEED, "db")).unwrap();
    let mut rng = seed::sub_rng(ROOT_SEED, "gen");
    let (mut pairs, mut mismatches, mut partial) = (0usize, 0usize, 0usize);
    for tables in schema.connected_table_sets(3) {
        let mut qs: Vec<Query> = vec![Query::new(tables.iter().cloned(), schema.joins_within(&tables), []).unwrap()];
        while qs.len() < A2_QUERIES_PER_FROM {
            qs.push(gen_query_for_tables(&db, &tables, &mut rng).unwrap());
        }
        let results: Vec<BTreeSet<Vec<i64>>> = qs.iter().map(|q| brute_force(q, &db)).collect();
        for (q1, r1) in qs.iter().zip(&results) {
            for (q2, r2) in qs.iter().zip(&results) {
                let expected = if r1.is_empty() {
                    0.0
                } else {
                    r1.intersection(r2).count() as f64 / r1.len() as f64
                };
                let got = true_containment_rate(q1, q2, &db).unwrap();
                if got != expected {
                    mismatches += 1;
                }
                if expected > 0.0 && expected < 1.0 {
                    partial += 1;
                }
                pairs += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        mismatches == 0 && elapsed < A2_BUDGET,
        format!("{pairs} ordered pairs over 6 FROM clauses, {mismatches} mismatches, {partial} with rate strictly between 0 and 1, {total} rows"),
    )
}

// ---------------------------------------------------------------- A3

fn random_set<R: Rng>(rng: &mut R, width: usize) -> VectorSet {
    let n = rng.gen_range(0..=4);
    let vs = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=width.min(3));
            let mut idx: Vec<usize> = (0..width).collect();
            idx.sort_by_key(|_| rng.gen::<u32>());
            FeatureVector::new(idx[..k].iter().map(|&i| (i, rng.gen_range(0.0..=1.0))).collect())
        })
        .collect();
    VectorSet::new(width, vs)
}

fn a3() -> Verdict {
    let mut rng = seed::sub_rng(ROOT_SEED, "a3");
    let floor = TrainConfig::default().label_floor;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for _ in 0..A3_CONFIGS {
        let l = rng.gen_range(2..=A3_MAX_L);
        let h = rng.gen_range(1..=A3_MAX_H);
        let mut p = CrnParams::init(l, h, rng.gen()).unwrap();
        // off-zero biases keep empty sets away from the ReLU kink at 0
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|x| *x += rng.gen_range(-0.3..0.3));
        }
        let sets: Vec<(VectorSet, VectorSet, f64)> = (0..rng.gen_range(1..=4))
            .map(|_| {
                (
                    random_set(&mut rng, l),
                    random_set(&mut rng, l),
                    rng.gen_range(0.0..=1.0),
                )
            })
            .collect();
        let batch: Vec<_> = sets.iter().map(|(a, b, y)| (a, b, *y)).collect();
        let (_, grad) = loss_and_grad(&p, &batch, floor).unwrap();
        let loss_at = |t: usize, i: usize, delta: f64| {
            let mut q = p.clone();
            q.tensors_mut()[t][i] += delta;
            mean_loss(&q, &batch, floor).unwrap()
        };
        // fourth-order stencil: truncation O(h^4), so h can be large enough
        // to keep rounding noise well below the tolerance
        let five_point = |t: usize, i: usize, h: f64| {
            (-loss_at(t, i, 2.0 * h) + 8.0 * loss_at(t, i, h) - 8.0 * loss_at(t, i, -h) + loss_at(t, i, -2.0 * h))
                / (12.0 * h)
        };
        let central = |t: usize, i: usize, h: f64| (loss_at(t, i, h) - loss_at(t, i, -h)) / (2.0 * h);
        for t in 0..8 {
            for i in 0..p.tensors()[t].len() {
                let an = grad.tensors()[t][i];
                let rel = |fd: f64| (an - fd).abs() / an.abs().max(fd.abs()).max(A3_REL_FLOOR);
                // a ReLU or |.| kink inside the wide stencil spoils only that quotient
                let err = rel(five_point(t, i, 1e-5)).min(rel(central(t, i, 1e-7)));
                worst = worst.max(err);
                checked += 1;
            }
        }
    }
    Verdict::new(
        worst < A3_REL_TOL,
        format!(
            "{A3_CONFIGS} configurations, {checked} parameters, max relative error {worst:.2e} (limit {A3_REL_TOL:e})"
        ),
    )
}

// ---------------------------------------------------------------- A4 / A5 / A7 shared setup

struct Trained {
    db: Database,
    model: Crn,
    report: TrainReport,
    validation: Vec<LabeledPair>,
    wall: Duration,
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let db = build_database(
            &Schema::movies(),
            &Schema::movies_row_counts(),
            seed::substream(ROOT_SEED, "db"),
        )
        .unwrap();
        let cfg = GenConfig {
            max_joins: A4_MAX_JOINS,
            seed: ROOT_SEED,
            ..GenConfig::default()
        };
        let pairs = qgen::generate_pairs(&cfg, &db, A4_PAIRS, &mut seed::sub_rng(ROOT_SEED, "gen")).unwrap();
        let (tr, va) = qgen::split_train_validation(&pairs);
        let tcfg = TrainConfig {
            hidden: A4_HIDDEN,
            batch_size: A4_BATCH,
            learning_rate: A4_LR,
            max_epochs: A4_MAX_EPOCHS,
            patience: A4_PATIENCE,
            seed: ROOT_SEED,
            ..TrainConfig::default()
        };
        let space = FeatureSpace::new(db.schema());
        let (params, report) = crn::train(&space, &tr, &va, &tcfg).unwrap();
        let model = Crn::new(space, params).unwrap();
        Trained {
            db,
            model,
            report,
            validation: va,
            wall: start.elapsed(),
        }
    })
}

struct CardinalitySetup {
    workload: Vec<LabeledQuery>,
    pool: QueriesPool,
    base: ColumnStatsModel,
}

fn cardinality_setup() -> &'static CardinalitySetup {
    static CELL: OnceLock<CardinalitySetup> = OnceLock::new();
    CELL.get_or_init(|| {
        let db = &trained().db;
        let cfg = GenConfig {
            max_joins: CRD_MAX_JOINS,
            seed: ROOT_SEED,
            ..GenConfig::default()
        };
        let mut rng = seed::sub_rng(ROOT_SEED, "crd");
        let workload = qgen::generate_queries(&cfg, db, CRD_QUERIES, &mut rng).unwrap();
        let mut pool = QueriesPool::new(
            qgen::generate_pool_queries(&cfg, db, POOL_QUERIES, &mut rng).unwrap(),
            QueriesPool::DEFAULT_EPSILON,
            FinalFn::Median,
        );
        pool.add_coverage(db, CRD_MAX_JOINS + 1).unwrap();
        CardinalitySetup {
            workload,
            pool,
            base: ColumnStatsModel::from_database(db),
        }
    })
}

fn a4() -> Verdict {
    let t = trained();
    let r = &t.report;
    let reduction = r.initial_val / r.best_val;
    let ev = eval_containment(&t.model, &t.validation, TrainConfig::default().label_floor).unwrap();
    let median = ev.overall.p50;
    let split = |zero: bool| {
        let q: Vec<f64> = ev
            .samples
            .iter()
            .filter(|x| (x.truth == 0.0) == zero)
            .map(|x| x.qerror)
            .collect();
        (q.len(), percentile(&q, 50.0).unwrap_or(f64::NAN))
    };
    let ((nz, mz), (np, mp)) = (split(true), split(false));
    let reduction_ok = reduction >= A4_MIN_REDUCTION;
    let median_ok = median <= A4_MAX_MEDIAN;
    Verdict::new(
        reduction_ok && median_ok && t.wall < A4_BUDGET,
        format!(
            "validation mean q-error {:.2} untrained -> {:.2} at best epoch {} ({reduction:.1}x, need {A4_MIN_REDUCTION}x: {}); \
             held-out median q-error {median:.2} (need <= {A4_MAX_MEDIAN}: {}; {mz:.2} over {nz} zero-rate pairs, \
             {mp:.2} over {np} positive-rate pairs); {} epochs, {} rows, {} validation pairs",
            r.initial_val,
            r.best_val,
            r.best_epoch,
            if reduction_ok { "met" } else { "unmet" },
            if median_ok { "met" } else { "unmet" },
            r.curve.len(),
            t.db.total_rows(),
            t.validation.len(),
        ),
    )
}

fn a5() -> Verdict {
    let t = trained();
    let s = cardinality_setup();
    let crn_est = PoolEstimator::new(&s.pool, &t.model, &s.base);
    let crn_ev = eval_cardinality(&crn_est, &s.workload).unwrap();
    let base_ev = eval_cardinality(&s.base, &s.workload).unwrap();
    let (c2, c3) = (median_of(&crn_ev, 2), median_of(&crn_ev, 3));
    let (b2, b3) = (median_of(&base_ev, 2), median_of(&base_ev, 3));
    let (cd, bd) = (c3 / c2, b3 / b2);
    Verdict::new(
        c3 < b3 && cd < bd,
        format!(
            "3-join median q-error Cnt2Crd(CRN) {c3:.2} vs baseline {b3:.2}; 2->3 join degradation {cd:.2}x vs {bd:.2}x; \
             {} queries, pool of {}",
            s.workload.len(),
            s.pool.len()
        ),
    )
}

// ---------------------------------------------------------------- A6

/// Number of scalars in a serialized checkpoint, counted from the JSON text.
fn serialized_scalars(json: &str) -> usize {
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    let params = &v["params"];
    ["mlp1", "mlp2", "out1", "out2"]
        .iter()
        .map(|layer| {
            ["weights", "bias"]
                .iter()
                .map(|k| params[layer][k].as_array().unwrap().len())
                .sum::<usize>()
        })
        .sum()
}

fn a6() -> Verdict {
    let mut rng = seed::sub_rng(ROOT_SEED, "a6");
    let mut seen = Vec::new();
    let mut ok = true;
    for _ in 0..A6_CONFIGS {
        let tables = rng.gen_range(1..=4);
        let mut defs = Vec::new();
        let mut edges = Vec::new();
        for t in 0..tables {
            let cols: Vec<String> = (0..rng.gen_range(0..=4))
                .map(|c| format!(r#"{{"name":"c{c}","min":0,"max":{}}}"#, rng.gen_range(1..50)))
                .collect();
            let keys = if t == 0 { r#"["id"]"# } else { r#"["id","p_id"]"# };
            defs.push(format!(
                r#"{{"name":"t{t}","key_cols":{keys},"cols":[{}]}}"#,
                cols.join(",")
            ));
            if t > 0 {
                edges.push(format!(r#"["t0.id","t{t}.p_id"]"#));
            }
        }
        let json = format!(
            r#"{{"tables":[{}],"join_edges":[{}]}}"#,
            defs.join(","),
            edges.join(",")
        );
        let space = FeatureSpace::new(&Schema::from_json(&json).unwrap());
        let (l, h) = (space.width(), rng.gen_range(1..=32));
        let model = Crn::new(space, CrnParams::init(l, h, rng.gen()).unwrap()).unwrap();
        let text = Checkpoint::new(&model, None).to_json().unwrap();
        let n = serialized_scalars(&text);
        let expected = 2 * l * h + 8 * h * h + 6 * h + 1;
        ok &= n == expected;
        seen.push(format!("({l},{h})={n}"));
    }
    Verdict::new(ok, format!("2LH+8H^2+6H+1 scalars for {}", seen.join(" ")))
}

// ---------------------------------------------------------------- A7

fn a7() -> Verdict {
    let s = cardinality_setup();
    let multi: Vec<LabeledQuery> = s
        .workload
        .iter()
        .filter(|w| w.query.join_count() >= A7_MIN_JOINS)
        .cloned()
        .collect();
    let imp = eval_cardinality(&improved(&s.pool, &s.base), &multi).unwrap().overall;
    let raw = eval_cardinality(&s.base, &multi).unwrap().overall;
    Verdict::new(
        imp.p50 <= raw.p50,
        format!(
            "median q-error on {} queries with >= {A7_MIN_JOINS} joins: improved {:.2} vs baseline {:.2} (means {:.2} vs {:.2})",
            multi.len(),
            imp.p50,
            raw.p50,
            imp.mean,
            raw.mean
        ),
    )
}

// ---------------------------------------------------------------- A8

fn a8() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |what: &str, got: Option<f64>, want: f64| {
        if got.is_none_or(|g| (g - want).abs() > 1e-12) {
            failures.push(format!("{what}: got {got:?}, want {want}"));
        }
    };
    // nearest rank: the ceil(p/100 * 10)-th smallest
    let a = [7.0, 1.0, 9.0, 3.0, 5.0, 10.0, 2.0, 8.0, 4.0, 6.0];
    check("p50", percentile(&a, 50.0), 5.0);
    check("p75", percentile(&a, 75.0), 8.0);
    check("p90", percentile(&a, 90.0), 9.0);
    check("p95", percentile(&a, 95.0), 10.0);
    check("p99", percentile(&a, 99.0), 10.0);
    check("p100", percentile(&a, 100.0), 10.0);
    check("p1", percentile(&a, 1.0), 1.0);
    check("median", final_fn(&a, FinalFn::Median), 5.5);
    check("mean", final_fn(&a, FinalFn::Mean), 5.5);
    // 12.5% per tail of 10 values trims ceil(1.25) = 2 from each end
    let b = [100.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, -50.0];
    check(
        "trimmed mean",
        final_fn(&b, FinalFn::trimmed_mean()),
        (2.0 + 3.0 + 4.0 + 5.0 + 6.0 + 7.0) / 6.0,
    );
    check(
        "trimmed 0.1",
        final_fn(&b, FinalFn::TrimmedMean { per_tail: 0.1 }),
        36.0 / 8.0,
    );
    check("median b", final_fn(&b, FinalFn::Median), 4.5);
    let q = [1.0, 1.5, 2.0, 2.0, 3.0, 4.0, 6.0, 8.0, 20.0, 100.0];
    let stats = QErrorStats::from_qerrors(&q).unwrap();
    check("stats p50", Some(stats.p50), 3.0);
    check("stats p90", Some(stats.p90), 20.0);
    check("stats max", Some(stats.max), 100.0);
    check("stats mean", Some(stats.mean), 147.5 / 10.0);
    let hand = failures.len();

    let mut rng = seed::sub_rng(ROOT_SEED, "a8");
    let mut unordered = 0;
    for _ in 0..A8_FUZZ_CASES {
        let n = rng.gen_range(1..200);
        let v: Vec<f64> = (0..n).map(|_| 1.0 + rng.gen::<f64>().powi(4) * 1e4).collect();
        let s = QErrorStats::from_qerrors(&v).unwrap();
        if !(s.is_ordered()
            && 1.0 <= s.p50
            && s.p50 <= s.p75
            && s.p75 <= s.p90
            && s.p90 <= s.p95
            && s.p95 <= s.p99
            && s.p99 <= s.max)
        {
            unordered += 1;
        }
    }
    Verdict::new(
        failures.is_empty() && unordered == 0,
        format!(
            "{hand} hand-computed mismatches{}; {unordered}/{A8_FUZZ_CASES} fuzzed stats out of order",
            if failures.is_empty() {
                String::new()
            } else {
                format!(" ({})", failures.join("; "))
            }
        ),
    )
}

// ---------------------------------------------------------------- A9

const SCHEMA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schemas/movies.json");

/// Runs a full pipeline in `dir` and returns its non-sidecar outputs.
fn pipeline(dir: &Path, seed: &str) -> BTreeMap<String, Vec<u8>> {
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let (db, pairs, queries, poolq, pool, ck) = (
        p("db"),
        p("pairs.jsonl"),
        p("queries.jsonl"),
        p("poolq.jsonl"),
        p("pool.jsonl"),
        p("model.json"),
    );
    let steps: Vec<Vec<String>> = vec![
        vec![
            "gen-db",
            "--schema",
            SCHEMA,
            "--out",
            &db,
            "--rows",
            "title=150",
            "--rows",
            "cast_info=450",
            "--rows",
            "movie_companies=300",
            "--rows",
            "movie_keyword=300",
        ],
        vec![
            "gen-workload",
            "--db",
            &db,
            "--kind",
            "pairs",
            "--n",
            "300",
            "--out",
            &pairs,
        ],
        vec![
            "gen-workload",
            "--db",
            &db,
            "--kind",
            "queries",
            "--max-joins",
            "3",
            "--n",
            "80",
            "--out",
            &queries,
        ],
        vec![
            "gen-workload",
            "--db",
            &db,
            "--kind",
            "pool",
            "--max-joins",
            "3",
            "--n",
            "40",
            "--out",
            &poolq,
        ],
        vec![
            "build-pool",
            "--db",
            &db,
            "--queries",
            &poolq,
            "--coverage",
            "4",
            "--out",
            &pool,
        ],
        vec![
            "train",
            "--db",
            &db,
            "--pairs",
            &pairs,
            "--out",
            &ck,
            "--curve",
            &p("curve.csv"),
            "--hidden",
            "16",
            "--max-epochs",
            "15",
            "--batch-size",
            "32",
        ],
        vec![
            "eval-cnt",
            "--db",
            &db,
            "--pairs",
            &pairs,
            "--checkpoint",
            &ck,
            "--out",
            &p("cnt.csv"),
            "--samples",
            &p("cnt_samples.csv"),
        ],
        vec![
            "eval-crd",
            "--db",
            &db,
            "--queries",
            &queries,
            "--pool",
            &pool,
            "--checkpoint",
            &ck,
            "--out",
            &p("crd.csv"),
            "--samples",
            &p("crd_samples.csv"),
        ],
        vec![
            "eval-crd",
            "--db",
            &db,
            "--queries",
            &queries,
            "--model",
            "baseline",
            "--out",
            &p("base.csv"),
        ],
        vec![
            "sweep-h",
            "--db",
            &db,
            "--pairs",
            &pairs,
            "--widths",
            "4,8",
            "--max-epochs",
            "3",
            "--out",
            &p("sweep.csv"),
        ],
    ]
    .into_iter()
    .map(|s| s.into_iter().map(String::from).collect())
    .collect();
    for step in steps {
        let args = ["crn", "--seed", seed].into_iter().map(String::from).chain(step);
        crn_cli::run(args).unwrap();
    }
    let mut files = BTreeMap::new();
    let mut stack: Vec<PathBuf> = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if !path.to_str().unwrap().ends_with(".meta.json") {
                let rel = path.strip_prefix(dir).unwrap().to_str().unwrap().to_string();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn a9() -> Verdict {
    let (d1, d2, d3) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    let first = pipeline(d1.path(), "11");
    let second = pipeline(d2.path(), "11");
    let other = pipeline(d3.path(), "12");
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    let seed_sensitive = first.iter().filter(|(k, v)| other.get(*k) != Some(v)).count();
    Verdict::new(
        differing.is_empty() && first.len() == second.len() && seed_sensitive > 0,
        format!(
            "{} output files byte-identical across re-runs ({} differing{}); {seed_sensitive} change under another seed",
            first.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {differing:?}") }
        ),
    )
}
