//! Independent tuple-at-a-time evaluator used as a test oracle.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use crn_core::query::{ColumnRef, Query};
use crn_core::relstore::{build_database, Database, Schema};

/// Distinct result tuples of `q`: nested loops over its tables in canonical
/// order, checking each join and predicate as soon as the tables it mentions
/// are bound.
pub fn brute_force(q: &Query, db: &Database) -> BTreeSet<Vec<i64>> {
    let schema = db.schema();
    let tables: Vec<&[Vec<i64>]> = q.tables().iter().map(|t| db.rows(t).unwrap()).collect();
    let table_of = |c: &ColumnRef| q.tables().iter().position(|t| *t == c.table).unwrap();
    let offset = |c: &ColumnRef| -> usize {
        let before: usize = q.tables()[..table_of(c)]
            .iter()
            .map(|t| schema.table(t).unwrap().width())
            .sum();
        before + schema.table(&c.table).unwrap().position(&c.column).unwrap()
    };
    // Checks grouped by the depth at which they become decidable.
    let mut joins = vec![Vec::new(); tables.len()];
    for j in q.joins() {
        let depth = table_of(j.left()).max(table_of(j.right()));
        joins[depth].push((offset(j.left()), offset(j.right())));
    }
    let mut preds = vec![Vec::new(); tables.len()];
    for p in q.preds() {
        preds[table_of(&p.column)].push((offset(&p.column), p.op, p.value));
    }

    fn descend(
        depth: usize,
        tuple: &mut Vec<i64>,
        tables: &[&[Vec<i64>]],
        joins: &[Vec<(usize, usize)>],
        preds: &[Vec<(usize, crn_core::query::Op, i64)>],
        out: &mut BTreeSet<Vec<i64>>,
    ) {
        if depth == tables.len() {
            out.insert(tuple.clone());
            return;
        }
        let base = tuple.len();
        for row in tables[depth] {
            tuple.extend_from_slice(row);
            if joins[depth].iter().all(|&(a, b)| tuple[a] == tuple[b])
                && preds[depth].iter().all(|&(pos, op, v)| op.eval(tuple[pos], v))
            {
                descend(depth + 1, tuple, tables, joins, preds, out);
            }
            tuple.truncate(base);
        }
    }

    let mut out = BTreeSet::new();
    descend(0, &mut Vec::new(), &tables, &joins, &preds, &mut out);
    out
}

/// `|Q1 ∩ Q2| / |Q1|` by explicit set intersection of the two results.
pub fn brute_rate(q1: &Query, q2: &Query, db: &Database) -> f64 {
    let r1 = brute_force(q1, db);
    if r1.is_empty() {
        return 0.0;
    }
    let r2 = brute_force(q2, db);
    r1.intersection(&r2).count() as f64 / r1.len() as f64
}

/// Three tables in a chain, small enough for cross products.
pub fn chain_schema() -> Schema {
    Schema::from_json(
        r#"{"tables":[
            {"name":"A","key_cols":["id"],"cols":[{"name":"x","min":0,"max":9},{"name":"w","min":0,"max":3}]},
            {"name":"B","key_cols":["id","a_id"],"cols":[{"name":"y","min":0,"max":9}]},
            {"name":"C","key_cols":["id","b_id"],"cols":[{"name":"z","min":0,"max":5}]}],
          "join_edges":[["A.id","B.a_id"],["B.id","C.b_id"]]}"#,
    )
    .unwrap()
}

pub fn chain_db(a: usize, b: usize, c: usize, seed: u64) -> Database {
    let counts = BTreeMap::from([("A".into(), a), ("B".into(), b), ("C".into(), c)]);
    build_database(&chain_schema(), &counts, seed).unwrap()
}
