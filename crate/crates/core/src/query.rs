//! Conjunctive queries as `(tables, joins, predicates)` triples.
//!
//! A [`Query`] is always held in canonical form: tables sorted, joins
//! oriented so that the lower `(table, column)` sits on the left, and both
//! joins and predicates sorted and deduplicated. The feature layout sorts
//! tables and columns the same way, so the canonical orientation of a join
//! agrees with its global column indices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relstore::Schema;

/// A globally-qualified column, written `table.column`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self {
            table: table.into(),
            column: column.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

impl FromStr for ColumnRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('.') {
            Some((t, c)) if !t.is_empty() && !c.is_empty() && !c.contains('.') => Ok(ColumnRef::new(t, c)),
            _ => Err(Error::Query(format!("malformed column reference `{s}`"))),
        }
    }
}

impl TryFrom<String> for ColumnRef {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ColumnRef> for String {
    fn from(c: ColumnRef) -> String {
        c.to_string()
    }
}

/// Comparison operator of a column predicate. The declaration order is the
/// one-hot order used by the featurizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">")]
    Gt,
}

impl Op {
    pub const ALL: [Op; 3] = [Op::Lt, Op::Eq, Op::Gt];

    pub fn index(self) -> usize {
        match self {
            Op::Lt => 0,
            Op::Eq => 1,
            Op::Gt => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Lt => "<",
            Op::Eq => "=",
            Op::Gt => ">",
        }
    }

    #[inline]
    pub fn eval(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Op::Lt => lhs < rhs,
            Op::Eq => lhs == rhs,
            Op::Gt => lhs > rhs,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Equi-join `left = right`, stored with `left < right`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(ColumnRef, ColumnRef)", into = "(ColumnRef, ColumnRef)")]
pub struct Join {
    left: ColumnRef,
    right: ColumnRef,
}

impl Join {
    /// Builds a join in canonical orientation.
    pub fn new(a: ColumnRef, b: ColumnRef) -> Result<Self> {
        if a.table == b.table {
            return Err(Error::Query(format!(
                "join {a} = {b} must reference two distinct tables"
            )));
        }
        let (left, right) = if a <= b { (a, b) } else { (b, a) };
        Ok(Join { left, right })
    }

    pub fn left(&self) -> &ColumnRef {
        &self.left
    }

    pub fn right(&self) -> &ColumnRef {
        &self.right
    }
}

impl TryFrom<(ColumnRef, ColumnRef)> for Join {
    type Error = Error;

    fn try_from((a, b): (ColumnRef, ColumnRef)) -> Result<Self> {
        Join::new(a, b)
    }
}

impl From<Join> for (ColumnRef, ColumnRef) {
    fn from(j: Join) -> Self {
        (j.left, j.right)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(ColumnRef, Op, i64)", into = "(ColumnRef, Op, i64)")]
pub struct Predicate {
    pub column: ColumnRef,
    pub op: Op,
    pub value: i64,
}

impl Predicate {
    pub fn new(column: ColumnRef, op: Op, value: i64) -> Self {
        Self { column, op, value }
    }
}

impl From<(ColumnRef, Op, i64)> for Predicate {
    fn from((column, op, value): (ColumnRef, Op, i64)) -> Self {
        Predicate { column, op, value }
    }
}

impl From<Predicate> for (ColumnRef, Op, i64) {
    fn from(p: Predicate) -> Self {
        (p.column, p.op, p.value)
    }
}

/// A `SELECT *` conjunctive query.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawQuery")]
pub struct Query {
    tables: Vec<String>,
    joins: Vec<Join>,
    preds: Vec<Predicate>,
}

#[derive(Deserialize)]
struct RawQuery {
    tables: Vec<String>,
    #[serde(default)]
    joins: Vec<Join>,
    #[serde(default)]
    preds: Vec<Predicate>,
}

impl TryFrom<RawQuery> for Query {
    type Error = Error;

    fn try_from(raw: RawQuery) -> Result<Self> {
        Query::new(raw.tables, raw.joins, raw.preds)
    }
}

impl Query {
    /// Builds and canonicalizes a query, checking its structural invariants.
    pub fn new(
        tables: impl IntoIterator<Item = impl Into<String>>,
        joins: impl IntoIterator<Item = Join>,
        preds: impl IntoIterator<Item = Predicate>,
    ) -> Result<Self> {
        Query {
            tables: tables.into_iter().map(Into::into).collect(),
            joins: joins.into_iter().collect(),
            preds: preds.into_iter().collect(),
        }
        .canonicalize()
    }

    /// Single-table query without predicates.
    pub fn scan(table: impl Into<String>) -> Self {
        Query {
            tables: vec![table.into()],
            joins: Vec::new(),
            preds: Vec::new(),
        }
    }

    pub fn tables(&self) -> &[String] {
        &self.tables
    }

    pub fn joins(&self) -> &[Join] {
        &self.joins
    }

    pub fn preds(&self) -> &[Predicate] {
        &self.preds
    }

    pub fn join_count(&self) -> usize {
        self.joins.len()
    }

    /// Canonical FROM clause key, used to index the queries pool.
    pub fn from_key(&self) -> String {
        self.tables.join(",")
    }

    /// Returns a copy with `preds` replaced, keeping tables and joins.
    pub fn with_preds(&self, preds: impl IntoIterator<Item = Predicate>) -> Self {
        let mut preds: Vec<Predicate> = preds.into_iter().collect();
        preds.sort();
        preds.dedup();
        Query {
            tables: self.tables.clone(),
            joins: self.joins.clone(),
            preds,
        }
    }

    /// Deterministic normal form. Idempotent.
    pub fn canonicalize(&self) -> Result<Query> {
        let mut tables = self.tables.clone();
        tables.sort();
        tables.dedup();
        if tables.is_empty() {
            return Err(Error::Query("query has no tables".into()));
        }

        let mut joins = self
            .joins
            .iter()
            .map(|j| Join::new(j.left.clone(), j.right.clone()))
            .collect::<Result<Vec<_>>>()?;
        joins.sort();
        joins.dedup();

        let mut preds = self.preds.clone();
        preds.sort();
        preds.dedup();

        let has = |t: &str| tables.binary_search_by(|x| x.as_str().cmp(t)).is_ok();
        for j in &joins {
            for c in [&j.left, &j.right] {
                if !has(&c.table) {
                    return Err(Error::Query(format!(
                        "join column {c} references a table outside the FROM clause"
                    )));
                }
            }
        }
        for p in &preds {
            if !has(&p.column.table) {
                return Err(Error::Query(format!(
                    "predicate column {} references a table outside the FROM clause",
                    p.column
                )));
            }
        }

        let q = Query { tables, joins, preds };
        if !q.is_connected() {
            return Err(Error::Query(format!(
                "join graph over {{{}}} is not connected",
                q.from_key()
            )));
        }
        Ok(q)
    }

    fn is_connected(&self) -> bool {
        if self.tables.len() <= 1 {
            return true;
        }
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for j in &self.joins {
            adj.entry(&j.left.table).or_default().push(&j.right.table);
            adj.entry(&j.right.table).or_default().push(&j.left.table);
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.tables[0].as_str()];
        while let Some(t) = stack.pop() {
            if seen.insert(t) {
                stack.extend(adj.get(t).into_iter().flatten().copied());
            }
        }
        seen.len() == self.tables.len()
    }

    /// Checks the query against a schema: known tables and columns, joins on
    /// declared edges, predicates on non-key columns only.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        for t in &self.tables {
            if schema.table(t).is_none() {
                return Err(Error::Query(format!("unknown table `{t}`")));
            }
        }
        for j in &self.joins {
            for c in [&j.left, &j.right] {
                if !schema.has_column(c) {
                    return Err(Error::Query(format!("unknown column `{c}`")));
                }
            }
            if !schema.is_join_edge(&j.left, &j.right) {
                return Err(Error::Query(format!(
                    "{} = {} is not a declared join edge",
                    j.left, j.right
                )));
            }
        }
        for p in &self.preds {
            if !schema.has_column(&p.column) {
                return Err(Error::Query(format!("unknown column `{}`", p.column)));
            }
            if schema.is_key(&p.column) {
                return Err(Error::Query(format!("predicate on key column `{}`", p.column)));
            }
        }
        Ok(())
    }

    /// Human-readable SQL rendering.
    pub fn to_sql(&self) -> String {
        let mut sql = format!("SELECT * FROM {}", self.tables.join(", "));
        let conds: Vec<String> = self
            .joins
            .iter()
            .map(|j| format!("{} = {}", j.left, j.right))
            .chain(self.preds.iter().map(|p| format!("{} {} {}", p.column, p.op, p.value)))
            .collect();
        if !conds.is_empty() {
            sql.push_str(" WHERE ");
            sql.push_str(&conds.join(" AND "));
        }
        sql
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sql())
    }
}

/// True iff both queries have the same FROM clause.
pub fn same_from(q1: &Query, q2: &Query) -> bool {
    q1.tables == q2.tables
}

/// The query whose WHERE clause is the conjunction of both WHERE clauses.
///
/// Joins are united as well as predicates; for queries with equal join sets
/// this is exactly `T = q1.T, J = q1.J, P = q1.P ∪ q2.P`.
pub fn intersect(q1: &Query, q2: &Query) -> Result<Query> {
    if !same_from(q1, q2) {
        return Err(Error::ContainmentDomain(format!(
            "FROM clauses differ: {{{}}} vs {{{}}}",
            q1.from_key(),
            q2.from_key()
        )));
    }
    let mut joins = q1.joins.clone();
    joins.extend(q2.joins.iter().cloned());
    joins.sort();
    joins.dedup();
    let mut preds = q1.preds.clone();
    preds.extend(q2.preds.iter().cloned());
    preds.sort();
    preds.dedup();
    Ok(Query {
        tables: q1.tables.clone(),
        joins,
        preds,
    })
}
