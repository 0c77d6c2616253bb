mod common;

use std::collections::BTreeMap;

use common::chain_db;
use crn_core::estimators::{
    cnt2crd_single, estimate_cardinality, final_fn, improved, independence_estimate, pool_estimates,
    CardinalityEstimator, ColumnStatsModel, ConstantCardinality, Crd2Cnt, ExactCardinality, ExactContainment, FinalFn,
    PoolEstimator, QueriesPool,
};
use crn_core::eval::eval_cardinality;
use crn_core::qgen::{generate_pool_queries, generate_queries, GenConfig, LabeledQuery};
use crn_core::query::{ColumnRef, Join, Op, Predicate, Query};
use crn_core::relstore::{cardinality, Database, Schema};
use crn_core::seed;
use proptest::prelude::*;

fn pool_for(db: &Database, n: usize, s: u64) -> QueriesPool {
    let cfg = GenConfig {
        max_joins: 2,
        ..GenConfig::default()
    };
    let recs = generate_pool_queries(&cfg, db, n, &mut seed::rng(s)).unwrap();
    QueriesPool::new(recs, QueriesPool::DEFAULT_EPSILON, FinalFn::Median)
}

#[test]
fn exact_rates_recover_exact_cardinalities() {
    let db = chain_db(30, 90, 150, 21);
    let mut pool = pool_for(&db, 60, 1);
    pool.add_coverage(&db, 3).unwrap();
    let cfg = GenConfig {
        max_joins: 2,
        nonempty: false,
        ..GenConfig::default()
    };
    let work = generate_queries(&cfg, &db, 120, &mut seed::rng(2)).unwrap();
    let exact = Crd2Cnt(ExactCardinality(&db));
    let mut applicable = 0;
    for LabeledQuery { query, card } in &work {
        let results = pool_estimates(query, &pool, &exact).unwrap();
        for r in &results {
            assert!(
                (r - *card as f64).abs() <= 1e-9 * (*card as f64).max(1.0),
                "{query}: {r} vs {card}"
            );
        }
        if !results.is_empty() {
            applicable += 1;
            let est = estimate_cardinality(query, &pool, &exact, &ConstantCardinality(-1.0)).unwrap();
            assert!((est - *card as f64).abs() <= 1e-9 * (*card as f64).max(1.0));
        }
    }
    assert!(applicable > work.len() / 2);
}

#[test]
fn cnt2crd_single_is_exact_whenever_applicable() {
    let db = chain_db(25, 60, 100, 8);
    let pool = pool_for(&db, 40, 3);
    let cfg = GenConfig {
        max_joins: 2,
        ..GenConfig::default()
    };
    let work = generate_queries(&cfg, &db, 60, &mut seed::rng(5)).unwrap();
    let rates = ExactContainment(&db);
    for w in &work {
        for rec in pool.same_from(&w.query) {
            if let Some(est) = cnt2crd_single(&rates, &w.query, rec).unwrap() {
                assert!((est - w.card as f64).abs() <= 1e-9 * (w.card as f64).max(1.0));
            }
        }
    }
}

#[test]
fn falls_back_without_a_matching_record() {
    let db = chain_db(10, 20, 30, 2);
    let a = Query::scan("A");
    let pool = QueriesPool::new(
        vec![LabeledQuery {
            query: Query::scan("B"),
            card: 20,
        }],
        0.01,
        FinalFn::Median,
    );
    let est = estimate_cardinality(&a, &pool, &ExactContainment(&db), &ConstantCardinality(42.0)).unwrap();
    assert_eq!(est, 42.0);
}

#[test]
fn improved_m_is_the_pool_estimator_over_crd2cnt() {
    let db = chain_db(30, 90, 150, 6);
    let mut pool = pool_for(&db, 45, 7);
    pool.add_coverage(&db, 3).unwrap();
    let base = ColumnStatsModel::from_database(&db);
    let via_helper = improved(&pool, &base);
    let by_hand = PoolEstimator::new(&pool, Crd2Cnt(&base), &base);
    let cfg = GenConfig {
        max_joins: 2,
        ..GenConfig::default()
    };
    for w in generate_queries(&cfg, &db, 40, &mut seed::rng(8)).unwrap() {
        let a = via_helper.estimate(&w.query).unwrap();
        assert_eq!(a, by_hand.estimate(&w.query).unwrap());
        assert_eq!(
            a,
            estimate_cardinality(&w.query, &pool, &Crd2Cnt(&base), &base).unwrap()
        );
    }
}

#[test]
fn generated_pool_is_spread_evenly_over_from_clauses() {
    let db = chain_db(30, 90, 150, 1);
    let pool = pool_for(&db, 300, 11);
    let sizes: Vec<usize> = pool.bucket_sizes().into_values().collect();
    assert_eq!(sizes.len(), db.schema().connected_table_sets(3).len());
    let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
    assert!(hi - lo <= 1, "{sizes:?}");
}

#[test]
fn coverage_gives_every_from_clause_a_predicate_free_record() {
    let db = chain_db(10, 20, 30, 3);
    let mut pool = QueriesPool::new(vec![], 0.01, FinalFn::Median);
    pool.add_coverage(&db, 3).unwrap();
    for tables in db.schema().connected_table_sets(3) {
        let q = Query::new(tables.iter().cloned(), db.schema().joins_within(&tables), []).unwrap();
        let rec = pool.same_from(&q).find(|r| r.query.preds().is_empty()).unwrap();
        assert_eq!(rec.card, cardinality(&q, &db).unwrap());
    }
}

fn uniform_pk_fk() -> Database {
    let s = Schema::from_json(
        r#"{"tables":[
            {"name":"P","key_cols":["id"],"cols":[{"name":"a","min":0,"max":4}]},
            {"name":"F","key_cols":["id","p_id"],"cols":[{"name":"b","min":0,"max":9}]}],
          "join_edges":[["P.id","F.p_id"]]}"#,
    )
    .unwrap();
    // 20 parents with 4 children each: 100 rows, uniform fan-out.
    let p: Vec<Vec<i64>> = (0..20).map(|i| vec![i, i % 5]).collect();
    let f: Vec<Vec<i64>> = (0..80).map(|i| vec![i, i % 20, (i * 7) % 10]).collect();
    Database::new(s, BTreeMap::from([("P".into(), p), ("F".into(), f)])).unwrap()
}

#[test]
fn independence_is_close_on_a_uniform_join() {
    let db = uniform_pk_fk();
    let stats = ColumnStatsModel::from_database(&db);
    let join = Join::new(ColumnRef::new("P", "id"), ColumnRef::new("F", "p_id")).unwrap();
    let queries = [
        Query::new(["P", "F"], [join.clone()], []).unwrap(),
        Query::new(
            ["P", "F"],
            [join.clone()],
            [Predicate::new(ColumnRef::new("P", "a"), Op::Eq, 2)],
        )
        .unwrap(),
        Query::new(
            ["P", "F"],
            [join.clone()],
            [Predicate::new(ColumnRef::new("F", "b"), Op::Lt, 5)],
        )
        .unwrap(),
        Query::new(
            ["P", "F"],
            [join],
            [
                Predicate::new(ColumnRef::new("P", "a"), Op::Gt, 1),
                Predicate::new(ColumnRef::new("F", "b"), Op::Gt, 2),
            ],
        )
        .unwrap(),
    ];
    for q in &queries {
        let truth = cardinality(q, &db).unwrap() as f64;
        let est = independence_estimate(q, &stats).unwrap();
        assert!(est / truth <= 2.0 && truth / est <= 2.0, "{q}: {est} vs {truth}");
    }
}

#[test]
fn baseline_and_oracle_evaluations() {
    let db = chain_db(20, 60, 90, 5);
    let cfg = GenConfig {
        max_joins: 2,
        ..GenConfig::default()
    };
    let work = generate_queries(&cfg, &db, 50, &mut seed::rng(1)).unwrap();
    let ev = eval_cardinality(&ExactCardinality(&db), &work).unwrap();
    assert_eq!(ev.overall.max, 1.0);
    let n: usize = ev.by_joins.0.values().map(|s| s.n).sum();
    assert_eq!(n, work.len());
    let base = eval_cardinality(&ColumnStatsModel::from_database(&db), &work).unwrap();
    assert!(base.overall.is_ordered() && base.overall.mean >= 1.0);
}

proptest! {
    #[test]
    fn median_and_trimmed_mean_stay_within_range(v in prop::collection::vec(0.0f64..1e6, 1..50)) {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for f in [FinalFn::Median, FinalFn::trimmed_mean()] {
            let x = final_fn(&v, f).unwrap();
            prop_assert!(x >= lo && x <= hi);
        }
    }

    #[test]
    fn final_functions_ignore_order(v in prop::collection::vec(0.0f64..1e6, 1..50), s in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut w = v.clone();
        w.shuffle(&mut seed::rng(s));
        for f in [FinalFn::Median, FinalFn::Mean, FinalFn::trimmed_mean()] {
            prop_assert_eq!(final_fn(&v, f), final_fn(&w, f));
        }
    }
}
