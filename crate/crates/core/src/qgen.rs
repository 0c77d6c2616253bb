//! Seeded workload generation.
//!
//! Training pairs are produced in three steps: random initial queries over a
//! connected set of joinable tables, perturbed variants of each initial query
//! (operator flips, redrawn literals, extra predicates), and pairing of
//! queries that share a FROM clause. Cardinality workloads stop after the
//! second step.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::{same_from, Op, Predicate, Query};
use crate::relstore::{cardinality, true_containment_rate, Database};

/// Attempts at drawing a non-empty initial query before accepting an empty one.
const NONEMPTY_RETRIES: usize = 64;
const PERTURB_RETRIES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Upper bound on joins per generated query.
    pub max_joins: usize,
    /// Initial queries drawn per generation round.
    pub n_initial: usize,
    pub perturbations_per_query: usize,
    /// Random pairs drawn among the perturbations of one initial query.
    pub sibling_pairs: usize,
    /// Random same-FROM pairs drawn across different initial queries, per group.
    pub cross_pairs: usize,
    /// Redraw initial queries and perturbations whose result is empty
    /// (bounded retries); cardinality workloads also drop empty queries.
    pub nonempty: bool,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_joins: 2,
            n_initial: 100,
            perturbations_per_query: 4,
            sibling_pairs: 2,
            cross_pairs: 2,
            nonempty: true,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self, db: &Database) -> Result<()> {
        if self.n_initial == 0 || self.perturbations_per_query == 0 {
            return Err(Error::Query(
                "n_initial and perturbations_per_query must be positive".into(),
            ));
        }
        if db.schema().tables.is_empty() {
            return Err(Error::Schema("schema has no tables".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub q1: Query,
    pub q2: Query,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledQuery {
    pub query: Query,
    #[serde(rename = "cardinality")]
    pub card: u64,
}

/// Connected table sets grouped by join count, capped at `max_joins`.
fn table_sets_by_joins(db: &Database, max_joins: usize) -> Vec<Vec<Vec<String>>> {
    let mut by_joins: Vec<Vec<Vec<String>>> = Vec::new();
    for set in db.schema().connected_table_sets(max_joins + 1) {
        let k = set.len() - 1;
        if by_joins.len() <= k {
            by_joins.resize(k + 1, Vec::new());
        }
        by_joins[k].push(set);
    }
    by_joins
}

/// Largest join count the schema can realize, up to `max_joins`.
pub fn join_cap(db: &Database, max_joins: usize) -> usize {
    table_sets_by_joins(db, max_joins).len().saturating_sub(1)
}

fn random_predicate<R: Rng>(db: &Database, table: &str, rng: &mut R) -> Option<Predicate> {
    let cols = db.schema().non_key_columns(table);
    let column = cols.choose(rng)?.clone();
    let op = *Op::ALL.choose(rng).expect("three ops");
    let (lo, hi) = db.value_range(&column)?;
    Some(Predicate::new(column, op, rng.gen_range(lo..=hi)))
}

/// Draws one query over exactly `tables`: the declared joins between them and,
/// for every table, a uniform number of predicates in `[0, #non-key columns]`.
pub fn gen_query_for_tables<R: Rng>(db: &Database, tables: &[String], rng: &mut R) -> Result<Query> {
    let joins = db.schema().joins_within(tables);
    let mut preds = Vec::new();
    for t in tables {
        let n_cols = db.schema().non_key_columns(t).len();
        let n = rng.gen_range(0..=n_cols);
        for _ in 0..n {
            preds.extend(random_predicate(db, t, rng));
        }
    }
    let q = Query::new(tables.iter().cloned(), joins, preds)?;
    q.validate(db.schema())?;
    Ok(q)
}

/// Step one: random initial queries. The join count is drawn uniformly from
/// `0..=max_joins` (capped by the schema), then a connected table set with
/// that many joins is drawn uniformly.
pub fn gen_initial_queries<R: Rng>(cfg: &GenConfig, db: &Database, rng: &mut R) -> Result<Vec<Query>> {
    cfg.validate(db)?;
    let sets = table_sets_by_joins(db, cfg.max_joins);
    let mut out = Vec::with_capacity(cfg.n_initial);
    for _ in 0..cfg.n_initial {
        let k = rng.gen_range(0..sets.len());
        let tables = sets[k].choose(rng).expect("non-empty bucket");
        let mut q = gen_query_for_tables(db, tables, rng)?;
        if cfg.nonempty {
            for _ in 0..NONEMPTY_RETRIES {
                if cardinality(&q, db)? > 0 {
                    break;
                }
                q = gen_query_for_tables(db, tables, rng)?;
            }
        }
        out.push(q);
    }
    Ok(out)
}

/// Step two: `n` variants of `q` that keep its tables and joins and differ
/// from it in at least one predicate. With `nonempty`, variants with an empty
/// result are only kept when retries run out.
pub fn perturb<R: Rng>(q: &Query, db: &Database, n: usize, nonempty: bool, rng: &mut R) -> Result<Vec<Query>> {
    let addable: Vec<_> = q
        .tables()
        .iter()
        .filter(|t| !db.schema().non_key_columns(t).is_empty())
        .cloned()
        .collect();
    if q.preds().is_empty() && addable.is_empty() {
        return Err(Error::EmptyPerturbation(format!(
            "`{q}` has no predicates and no non-key columns"
        )));
    }

    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut produced = None;
        let mut fallback = None;
        for _ in 0..PERTURB_RETRIES {
            let mut preds = q.preds().to_vec();
            let steps = rng.gen_range(1..=2);
            for _ in 0..steps {
                let action = if preds.is_empty() { 2 } else { rng.gen_range(0..3) };
                match action {
                    0 => {
                        let p = preds.choose_mut(rng).expect("non-empty");
                        let others: Vec<Op> = Op::ALL.into_iter().filter(|o| *o != p.op).collect();
                        p.op = *others.choose(rng).expect("two other ops");
                    }
                    1 => {
                        let p = preds.choose_mut(rng).expect("non-empty");
                        if let Some((lo, hi)) = db.value_range(&p.column) {
                            p.value = rng.gen_range(lo..=hi);
                        }
                    }
                    _ => {
                        if let Some(t) = addable.choose(rng) {
                            preds.extend(random_predicate(db, t, rng));
                        }
                    }
                }
            }
            let candidate = q.with_preds(preds);
            if candidate == *q {
                continue;
            }
            if nonempty && cardinality(&candidate, db)? == 0 {
                fallback.get_or_insert(candidate);
                continue;
            }
            produced = Some(candidate);
            break;
        }
        match produced.or(fallback) {
            Some(p) => out.push(p),
            None => return Err(Error::EmptyPerturbation(format!("no distinct variant of `{q}` found"))),
        }
    }
    Ok(out)
}

/// Step three: same-FROM pairs. `perturbed[i]` holds the variants of
/// `initial[i]`. Each initial query is paired with each of its variants in
/// both orders, plus `sibling_pairs` random pairs among its variants and
/// `cross_pairs` random pairs with members of other same-FROM groups.
/// Duplicate ordered pairs are dropped, keeping the first occurrence.
pub fn pair_queries<R: Rng>(
    initial: &[Query],
    perturbed: &[Vec<Query>],
    cfg: &GenConfig,
    rng: &mut R,
) -> Vec<(Query, Query)> {
    let mut by_from: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, q) in initial.iter().enumerate() {
        by_from.entry(q.from_key()).or_default().push(i);
    }
    let group = |i: usize| -> Vec<&Query> {
        std::iter::once(&initial[i])
            .chain(perturbed.get(i).into_iter().flatten())
            .collect()
    };

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |a: &Query, b: &Query, out: &mut Vec<(Query, Query)>| {
        if same_from(a, b) && seen.insert((a.clone(), b.clone())) {
            out.push((a.clone(), b.clone()));
        }
    };

    for (i, q) in initial.iter().enumerate() {
        let variants = perturbed.get(i).map(Vec::as_slice).unwrap_or(&[]);
        for p in variants {
            push(q, p, &mut out);
            push(p, q, &mut out);
        }
        if variants.len() >= 2 {
            for _ in 0..cfg.sibling_pairs {
                let mut pick = variants.choose_multiple(rng, 2);
                let (a, b) = (pick.next().unwrap(), pick.next().unwrap());
                push(a, b, &mut out);
            }
        }
        let peers = &by_from[&q.from_key()];
        if peers.len() >= 2 {
            let mine = group(i);
            for _ in 0..cfg.cross_pairs {
                let j = *peers.choose(rng).unwrap();
                if j == i {
                    continue;
                }
                let theirs = group(j);
                let a = *mine.choose(rng).unwrap();
                let b = *theirs.choose(rng).unwrap();
                if rng.gen_bool(0.5) {
                    push(a, b, &mut out);
                } else {
                    push(b, a, &mut out);
                }
            }
        }
    }
    out
}

/// Labels pairs with their true containment rates.
pub fn label_dataset(pairs: &[(Query, Query)], db: &Database) -> Result<Vec<LabeledPair>> {
    let mut cache: HashMap<Query, u64> = HashMap::new();
    let mut card = |q: &Query| -> Result<u64> {
        if let Some(&c) = cache.get(q) {
            return Ok(c);
        }
        let c = cardinality(q, db)?;
        cache.insert(q.clone(), c);
        Ok(c)
    };
    pairs
        .iter()
        .map(|(q1, q2)| {
            let base = card(q1)?;
            let rate = if base == 0 {
                0.0
            } else {
                card(&crate::query::intersect(q1, q2)?)? as f64 / base as f64
            };
            Ok(LabeledPair {
                q1: q1.clone(),
                q2: q2.clone(),
                rate,
            })
        })
        .collect()
}

/// Reference labelling, one independent containment computation per pair.
pub fn label_dataset_direct(pairs: &[(Query, Query)], db: &Database) -> Result<Vec<LabeledPair>> {
    pairs
        .iter()
        .map(|(q1, q2)| {
            Ok(LabeledPair {
                q1: q1.clone(),
                q2: q2.clone(),
                rate: true_containment_rate(q1, q2, db)?,
            })
        })
        .collect()
}

pub fn label_queries(queries: &[Query], db: &Database) -> Result<Vec<LabeledQuery>> {
    queries
        .iter()
        .map(|q| {
            Ok(LabeledQuery {
                query: q.clone(),
                card: cardinality(q, db)?,
            })
        })
        .collect()
}

/// 80% / 20% split, in order.
pub fn split_train_validation<T: Clone>(items: &[T]) -> (Vec<T>, Vec<T>) {
    let cut = (items.len() * 4).div_ceil(5).min(items.len());
    (items[..cut].to_vec(), items[cut..].to_vec())
}

/// Runs all three steps until `n` unique labelled pairs exist. The pair list
/// is shuffled before truncation so that the validation split is drawn from
/// the whole generation run.
pub fn generate_pairs<R: Rng>(cfg: &GenConfig, db: &Database, n: usize, rng: &mut R) -> Result<Vec<LabeledPair>> {
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    let mut stalled = 0;
    while pairs.len() < n {
        let before = pairs.len();
        let initial = gen_initial_queries(cfg, db, rng)?;
        let mut perturbed = Vec::with_capacity(initial.len());
        for q in &initial {
            perturbed.push(match perturb(q, db, cfg.perturbations_per_query, cfg.nonempty, rng) {
                Ok(v) => v,
                Err(Error::EmptyPerturbation(_)) => Vec::new(),
                Err(e) => return Err(e),
            });
        }
        for p in pair_queries(&initial, &perturbed, cfg, rng) {
            if seen.insert(p.clone()) {
                pairs.push(p);
            }
        }
        stalled = if pairs.len() == before { stalled + 1 } else { 0 };
        if stalled > 8 {
            return Err(Error::Query(format!(
                "generator saturated after {} unique pairs",
                pairs.len()
            )));
        }
    }
    pairs.shuffle(rng);
    pairs.truncate(n);
    label_dataset(&pairs, db)
}

/// Steps one and two only: `n` unique labelled queries. With
/// `nonempty`, zero-cardinality queries are skipped.
pub fn generate_queries<R: Rng>(cfg: &GenConfig, db: &Database, n: usize, rng: &mut R) -> Result<Vec<LabeledQuery>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut stalled = 0;
    while out.len() < n {
        let before = out.len();
        let initial = gen_initial_queries(cfg, db, rng)?;
        for q in initial {
            let mut group = vec![q.clone()];
            if let Ok(v) = perturb(&q, db, cfg.perturbations_per_query, cfg.nonempty, rng) {
                group.extend(v);
            }
            for g in group {
                if out.len() >= n || seen.contains(&g) {
                    continue;
                }
                let card = cardinality(&g, db)?;
                seen.insert(g.clone());
                if cfg.nonempty && card == 0 {
                    continue;
                }
                out.push(LabeledQuery { query: g, card });
            }
        }
        stalled = if out.len() == before { stalled + 1 } else { 0 };
        if stalled > 8 {
            return Err(Error::Query(format!(
                "generator saturated after {} unique queries",
                out.len()
            )));
        }
    }
    Ok(out)
}

/// `n` labelled queries spread equally (round-robin) over every connected
/// FROM clause with at most `cfg.max_joins` joins.
pub fn generate_pool_queries<R: Rng>(
    cfg: &GenConfig,
    db: &Database,
    n: usize,
    rng: &mut R,
) -> Result<Vec<LabeledQuery>> {
    let sets = db.schema().connected_table_sets(cfg.max_joins + 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let tables = &sets[i % sets.len()];
        let mut q = gen_query_for_tables(db, tables, rng)?;
        if cfg.nonempty {
            for _ in 0..NONEMPTY_RETRIES {
                if cardinality(&q, db)? > 0 {
                    break;
                }
                q = gen_query_for_tables(db, tables, rng)?;
            }
        }
        let card = cardinality(&q, db)?;
        out.push(LabeledQuery { query: q, card });
    }
    Ok(out)
}

/// First line of every workload file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadHeader {
    pub kind: WorkloadKind,
    pub schema_hash: String,
    pub seed: u64,
    pub max_joins: usize,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadKind {
    Pairs,
    Queries,
}

fn write_jsonl<T: Serialize>(path: &Path, header: &WorkloadHeader, items: &[T]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path, kind: WorkloadKind) -> Result<(WorkloadHeader, Vec<T>)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format {
            path: path.into(),
            reason: "empty workload file".into(),
        })?
        .map_err(|e| Error::io(path, e))?;
    let header: WorkloadHeader = serde_json::from_str(&first)?;
    if header.kind != kind {
        return Err(Error::Format {
            path: path.into(),
            reason: format!("expected a {kind:?} workload, found {:?}", header.kind),
        });
    }
    let mut items = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            items.push(serde_json::from_str(&line)?);
        }
    }
    if items.len() != header.count {
        return Err(Error::Format {
            path: path.into(),
            reason: format!("header announces {} records, found {}", header.count, items.len()),
        });
    }
    Ok((header, items))
}

pub fn write_pairs(
    path: impl AsRef<Path>,
    schema_hash: &str,
    seed: u64,
    max_joins: usize,
    pairs: &[LabeledPair],
) -> Result<()> {
    let header = WorkloadHeader {
        kind: WorkloadKind::Pairs,
        schema_hash: schema_hash.into(),
        seed,
        max_joins,
        count: pairs.len(),
    };
    write_jsonl(path.as_ref(), &header, pairs)
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<(WorkloadHeader, Vec<LabeledPair>)> {
    read_jsonl(path.as_ref(), WorkloadKind::Pairs)
}

pub fn write_queries(
    path: impl AsRef<Path>,
    schema_hash: &str,
    seed: u64,
    max_joins: usize,
    queries: &[LabeledQuery],
) -> Result<()> {
    let header = WorkloadHeader {
        kind: WorkloadKind::Queries,
        schema_hash: schema_hash.into(),
        seed,
        max_joins,
        count: queries.len(),
    };
    write_jsonl(path.as_ref(), &header, queries)
}

pub fn read_queries(path: impl AsRef<Path>) -> Result<(WorkloadHeader, Vec<LabeledQuery>)> {
    read_jsonl(path.as_ref(), WorkloadKind::Queries)
}
