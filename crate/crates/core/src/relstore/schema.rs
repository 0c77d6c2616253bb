use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::{ColumnRef, Join};
use crate::seed::short_hash;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub min: i64,
    pub max: i64,
}

/// A table definition. The first key column is the table's primary key
/// (populated with row ids); further key columns are foreign keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub key_cols: Vec<String>,
    pub cols: Vec<ColumnDef>,
}

impl TableDef {
    /// Width of a stored row: key columns followed by non-key columns.
    pub fn width(&self) -> usize {
        self.key_cols.len() + self.cols.len()
    }

    pub fn primary_key(&self) -> Option<&str> {
        self.key_cols.first().map(String::as_str)
    }

    /// Position of `column` within a stored row.
    pub fn position(&self, column: &str) -> Option<usize> {
        self.key_cols.iter().position(|c| c == column).or_else(|| {
            self.cols
                .iter()
                .position(|c| c.name == column)
                .map(|i| i + self.key_cols.len())
        })
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.key_cols
            .iter()
            .map(String::as_str)
            .chain(self.cols.iter().map(|c| c.name.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub tables: Vec<TableDef>,
    pub join_edges: Vec<(ColumnRef, ColumnRef)>,
}

impl Schema {
    pub fn from_json(json: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(json)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// Stable hash of the schema's canonical JSON encoding.
    pub fn hash(&self) -> String {
        short_hash(&serde_json::to_vec(self).expect("schema serializes"))
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for t in &self.tables {
            if !names.insert(t.name.as_str()) {
                return Err(Error::Schema(format!("duplicate table `{}`", t.name)));
            }
            if t.name.contains('.') || t.name.is_empty() {
                return Err(Error::Schema(format!("invalid table name `{}`", t.name)));
            }
            let mut cols = BTreeSet::new();
            for c in t.column_names() {
                if c.contains('.') || c.is_empty() {
                    return Err(Error::Schema(format!("invalid column name `{}.{c}`", t.name)));
                }
                if !cols.insert(c) {
                    return Err(Error::Schema(format!("duplicate column `{}.{c}`", t.name)));
                }
            }
            for c in &t.cols {
                if c.min > c.max {
                    return Err(Error::Schema(format!(
                        "column `{}.{}` has min {} > max {}",
                        t.name, c.name, c.min, c.max
                    )));
                }
            }
        }

        for (a, b) in &self.join_edges {
            for c in [a, b] {
                if !self.has_column(c) {
                    return Err(Error::Schema(format!("join edge references missing column `{c}`")));
                }
                if !self.is_key(c) {
                    return Err(Error::Schema(format!("join edge column `{c}` is not a key column")));
                }
            }
            if a.table == b.table {
                return Err(Error::Schema(format!("join edge {a} = {b} is a self-join")));
            }
            let a_pk = self.is_primary_key(a);
            let b_pk = self.is_primary_key(b);
            if a_pk == b_pk {
                return Err(Error::Schema(format!(
                    "join edge {a} = {b} must link one primary key to one foreign key"
                )));
            }
        }
        // each foreign key column references at most one primary key
        let mut fk_targets: BTreeMap<&ColumnRef, usize> = BTreeMap::new();
        for (a, b) in &self.join_edges {
            let fk = if self.is_primary_key(a) { b } else { a };
            *fk_targets.entry(fk).or_default() += 1;
        }
        if let Some((fk, _)) = fk_targets.iter().find(|(_, n)| **n > 1) {
            return Err(Error::Schema(format!("foreign key `{fk}` has several targets")));
        }
        Ok(())
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables.iter().position(|t| t.name == name)
    }

    pub fn has_column(&self, c: &ColumnRef) -> bool {
        self.table(&c.table).is_some_and(|t| t.position(&c.column).is_some())
    }

    pub fn is_key(&self, c: &ColumnRef) -> bool {
        self.table(&c.table).is_some_and(|t| t.key_cols.contains(&c.column))
    }

    pub fn is_primary_key(&self, c: &ColumnRef) -> bool {
        self.table(&c.table)
            .and_then(TableDef::primary_key)
            .is_some_and(|pk| pk == c.column)
    }

    pub fn column_def(&self, c: &ColumnRef) -> Option<&ColumnDef> {
        self.table(&c.table)?.cols.iter().find(|d| d.name == c.column)
    }

    /// Every column in canonical `(table, column)` order.
    pub fn all_columns(&self) -> Vec<ColumnRef> {
        let mut cols: Vec<ColumnRef> = self
            .tables
            .iter()
            .flat_map(|t| t.column_names().map(|c| ColumnRef::new(&t.name, c)))
            .collect();
        cols.sort();
        cols
    }

    /// Non-key columns of `table`, in declaration order.
    pub fn non_key_columns(&self, table: &str) -> Vec<ColumnRef> {
        self.table(table)
            .map(|t| t.cols.iter().map(|c| ColumnRef::new(table, &c.name)).collect())
            .unwrap_or_default()
    }

    pub fn is_join_edge(&self, a: &ColumnRef, b: &ColumnRef) -> bool {
        self.join_edges
            .iter()
            .any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    /// All declared edges between tables in `tables`, as canonical joins.
    pub fn joins_within(&self, tables: &[String]) -> Vec<Join> {
        let inside = |c: &ColumnRef| tables.contains(&c.table);
        let mut joins: Vec<Join> = self
            .join_edges
            .iter()
            .filter(|(a, b)| inside(a) && inside(b))
            .map(|(a, b)| Join::new(a.clone(), b.clone()).expect("validated edge"))
            .collect();
        joins.sort();
        joins.dedup();
        joins
    }

    /// All connected table sets of size `1..=max_tables`, each sorted, in
    /// canonical order (by size, then lexicographically).
    pub fn connected_table_sets(&self, max_tables: usize) -> Vec<Vec<String>> {
        let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (a, b) in &self.join_edges {
            adj.entry(&a.table).or_default().insert(&b.table);
            adj.entry(&b.table).or_default().insert(&a.table);
        }
        let mut found: BTreeSet<BTreeSet<&str>> = BTreeSet::new();
        let mut frontier: Vec<BTreeSet<&str>> = Vec::new();
        if max_tables >= 1 {
            for t in &self.tables {
                let s = BTreeSet::from([t.name.as_str()]);
                found.insert(s.clone());
                frontier.push(s);
            }
        }
        for _ in 1..max_tables {
            let mut next = Vec::new();
            for set in &frontier {
                for t in set {
                    for n in adj.get(t).into_iter().flatten() {
                        if !set.contains(n) {
                            let mut grown = set.clone();
                            grown.insert(n);
                            if found.insert(grown.clone()) {
                                next.push(grown);
                            }
                        }
                    }
                }
            }
            frontier = next;
        }
        let mut sets: Vec<Vec<String>> = found
            .into_iter()
            .map(|s| s.into_iter().map(String::from).collect())
            .collect();
        sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        sets
    }

    /// A four-table star schema shaped after a movie database: a central
    /// `title` table referenced by three fact tables.
    pub fn movies() -> Self {
        fn col(name: &str, min: i64, max: i64) -> ColumnDef {
            ColumnDef {
                name: name.into(),
                min,
                max,
            }
        }
        fn edge(a: &str, b: &str) -> (ColumnRef, ColumnRef) {
            (a.parse().unwrap(), b.parse().unwrap())
        }
        Schema {
            tables: vec![
                TableDef {
                    name: "title".into(),
                    key_cols: vec!["id".into()],
                    cols: vec![
                        col("production_year", 1990, 2019),
                        col("kind", 0, 6),
                        col("rating", 1, 10),
                    ],
                },
                TableDef {
                    name: "cast_info".into(),
                    key_cols: vec!["id".into(), "title_id".into()],
                    cols: vec![col("role", 0, 10), col("nr_order", 1, 15), col("age", 20, 69)],
                },
                TableDef {
                    name: "movie_companies".into(),
                    key_cols: vec!["id".into(), "title_id".into()],
                    cols: vec![col("company_type", 0, 3), col("country", 0, 19)],
                },
                TableDef {
                    name: "movie_keyword".into(),
                    key_cols: vec!["id".into(), "title_id".into()],
                    cols: vec![col("keyword", 0, 49)],
                },
            ],
            join_edges: vec![
                edge("title.id", "cast_info.title_id"),
                edge("title.id", "movie_companies.title_id"),
                edge("title.id", "movie_keyword.title_id"),
            ],
        }
    }

    /// Default row counts for [`Schema::movies`], 10,000 rows in total.
    pub fn movies_row_counts() -> BTreeMap<String, usize> {
        [
            ("title", 1000),
            ("cast_info", 4000),
            ("movie_companies", 2500),
            ("movie_keyword", 2500),
        ]
        .into_iter()
        .map(|(t, n)| (t.to_string(), n))
        .collect()
    }
}
