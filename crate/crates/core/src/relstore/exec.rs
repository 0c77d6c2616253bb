//! Exact evaluation of conjunctive queries.
//!
//! Observable semantics are those of a nested-loop evaluation over the
//! distinct rows of each table: the cross product of the FROM tables filtered
//! by every join equality and every column predicate. Predicates are pushed
//! down to the scans, joins run as hash lookups, and acyclic join graphs are
//! counted with a bottom-up pass over the join tree instead of enumerating
//! result tuples.

use std::collections::{BTreeSet, HashMap};

use super::database::Database;
use crate::error::{Error, Result};
use crate::query::{intersect, same_from, Query};

/// Distinct full-width result tuples. Each tuple is the concatenation of the
/// rows of `tables` (canonical order), key columns first within each table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSet {
    pub tables: Vec<String>,
    pub rows: BTreeSet<Vec<i64>>,
}

impl ResultSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

struct JoinEdge {
    a: usize,
    a_pos: usize,
    b: usize,
    b_pos: usize,
}

struct Plan<'a> {
    db: &'a Database,
    schema_idx: Vec<usize>,
    candidates: Vec<Vec<u32>>,
    joins: Vec<JoinEdge>,
}

impl<'a> Plan<'a> {
    fn new(q: &Query, db: &'a Database) -> Result<Self> {
        q.validate(db.schema())?;
        let schema = db.schema();
        let schema_idx: Vec<usize> = q
            .tables()
            .iter()
            .map(|t| schema.table_index(t).expect("validated"))
            .collect();
        let qpos = |t: &str| q.tables().iter().position(|x| x == t).expect("validated");
        let col_pos = |c: &crate::query::ColumnRef| {
            schema
                .table(&c.table)
                .and_then(|t| t.position(&c.column))
                .expect("validated")
        };

        let candidates = q
            .tables()
            .iter()
            .zip(&schema_idx)
            .map(|(t, &si)| {
                let filters: Vec<_> = q
                    .preds()
                    .iter()
                    .filter(|p| p.column.table == *t)
                    .map(|p| (col_pos(&p.column), p.op, p.value))
                    .collect();
                let rows = db.rows_at(si);
                db.distinct_rows_at(si)
                    .iter()
                    .copied()
                    .filter(|&r| {
                        let row = &rows[r as usize];
                        filters.iter().all(|&(pos, op, v)| op.eval(row[pos], v))
                    })
                    .collect()
            })
            .collect();

        let joins = q
            .joins()
            .iter()
            .map(|j| JoinEdge {
                a: qpos(&j.left().table),
                a_pos: col_pos(j.left()),
                b: qpos(&j.right().table),
                b_pos: col_pos(j.right()),
            })
            .collect();

        Ok(Plan {
            db,
            schema_idx,
            candidates,
            joins,
        })
    }

    fn value(&self, t: usize, row: u32, pos: usize) -> i64 {
        self.db.rows_at(self.schema_idx[t])[row as usize][pos]
    }

    fn is_tree(&self) -> bool {
        self.joins.len() + 1 == self.schema_idx.len()
    }

    /// Enumerates every result tuple as per-table row indices.
    fn enumerate(&self, mut emit: impl FnMut(&[u32])) {
        let n = self.schema_idx.len();
        let mut order = vec![0usize];
        let mut placed = vec![false; n];
        placed[0] = true;
        while order.len() < n {
            let next = (0..n)
                .find(|&t| {
                    !placed[t]
                        && self
                            .joins
                            .iter()
                            .any(|j| (j.a == t && placed[j.b]) || (j.b == t && placed[j.a]))
                })
                .expect("join graph is connected");
            placed[next] = true;
            order.push(next);
        }

        const UNSET: u32 = u32::MAX;
        let mut partial: Vec<Vec<u32>> = self.candidates[0]
            .iter()
            .map(|&r| {
                let mut p = vec![UNSET; n];
                p[0] = r;
                p
            })
            .collect();
        let mut done = vec![false; n];
        done[0] = true;

        for &t in &order[1..] {
            // (own column position, other table, other column position)
            let links: Vec<(usize, usize, usize)> = self
                .joins
                .iter()
                .filter_map(|j| {
                    if j.a == t && done[j.b] {
                        Some((j.a_pos, j.b, j.b_pos))
                    } else if j.b == t && done[j.a] {
                        Some((j.b_pos, j.a, j.a_pos))
                    } else {
                        None
                    }
                })
                .collect();
            let (probe_pos, probe_t, probe_other_pos) = links[0];
            let mut index: HashMap<i64, Vec<u32>> = HashMap::new();
            for &r in &self.candidates[t] {
                index.entry(self.value(t, r, probe_pos)).or_default().push(r);
            }
            let mut grown = Vec::new();
            for p in &partial {
                let key = self.value(probe_t, p[probe_t], probe_other_pos);
                for &r in index.get(&key).into_iter().flatten() {
                    let ok = links[1..].iter().all(|&(own, other, other_pos)| {
                        self.value(t, r, own) == self.value(other, p[other], other_pos)
                    });
                    if ok {
                        let mut q = p.clone();
                        q[t] = r;
                        grown.push(q);
                    }
                }
            }
            partial = grown;
            done[t] = true;
        }

        for p in &partial {
            emit(p);
        }
    }

    /// Result size of an acyclic join graph, by weight propagation from the
    /// leaves towards table 0.
    fn count_tree(&self) -> u64 {
        let w = self.subtree_weights(0, None);
        w.iter().fold(0u64, |acc, &x| acc.saturating_add(x))
    }

    fn subtree_weights(&self, t: usize, parent: Option<usize>) -> Vec<u64> {
        let mut w = vec![1u64; self.candidates[t].len()];
        for j in &self.joins {
            let (own_pos, child, child_pos) = if j.a == t {
                (j.a_pos, j.b, j.b_pos)
            } else if j.b == t {
                (j.b_pos, j.a, j.a_pos)
            } else {
                continue;
            };
            if Some(child) == parent {
                continue;
            }
            let cw = self.subtree_weights(child, Some(t));
            let mut sums: HashMap<i64, u64> = HashMap::new();
            for (&r, &x) in self.candidates[child].iter().zip(&cw) {
                if x > 0 {
                    let e = sums.entry(self.value(child, r, child_pos)).or_default();
                    *e = e.saturating_add(x);
                }
            }
            for (wi, &r) in w.iter_mut().zip(&self.candidates[t]) {
                if *wi > 0 {
                    let m = sums.get(&self.value(t, r, own_pos)).copied().unwrap_or(0);
                    *wi = wi.saturating_mul(m);
                }
            }
        }
        w
    }
}

/// Materializes `Q(D)`.
pub fn execute(q: &Query, db: &Database) -> Result<ResultSet> {
    let plan = Plan::new(q, db)?;
    let mut rows = BTreeSet::new();
    plan.enumerate(|idx| {
        let mut tuple = Vec::new();
        for (t, &r) in idx.iter().enumerate() {
            tuple.extend_from_slice(&db.rows_at(plan.schema_idx[t])[r as usize]);
        }
        rows.insert(tuple);
    });
    Ok(ResultSet {
        tables: q.tables().to_vec(),
        rows,
    })
}

/// `|Q(D)|`.
pub fn cardinality(q: &Query, db: &Database) -> Result<u64> {
    let plan = Plan::new(q, db)?;
    if plan.is_tree() {
        Ok(plan.count_tree())
    } else {
        let mut n = 0u64;
        plan.enumerate(|_| n += 1);
        Ok(n)
    }
}

/// Fraction of `q1`'s result tuples that are also in `q2`'s result;
/// 0 when `q1`'s result is empty.
pub fn true_containment_rate(q1: &Query, q2: &Query, db: &Database) -> Result<f64> {
    if !same_from(q1, q2) {
        return Err(Error::ContainmentDomain(format!(
            "FROM clauses differ: {{{}}} vs {{{}}}",
            q1.from_key(),
            q2.from_key()
        )));
    }
    let base = cardinality(q1, db)?;
    if base == 0 {
        return Ok(0.0);
    }
    let both = cardinality(&intersect(q1, q2)?, db)?;
    Ok(both as f64 / base as f64)
}
