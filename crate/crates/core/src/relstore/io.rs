//! Database dump format: a `manifest.json` plus one JSON-lines file per table,
//! each line holding one row as an integer array.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::database::Database;
use super::schema::Schema;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: Schema,
    pub schema_hash: String,
    pub seed: Option<u64>,
    pub tables: Vec<TableFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub name: String,
    pub file: String,
    pub rows: usize,
}

pub fn dump(db: &Database, dir: impl AsRef<Path>, seed: Option<u64>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let schema = db.schema();
    let mut tables = Vec::new();
    for t in &schema.tables {
        let file = format!("{}.jsonl", t.name);
        let path = dir.join(&file);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(f);
        let rows = db.rows(&t.name).expect("table exists");
        for r in rows {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        tables.push(TableFile {
            name: t.name.clone(),
            file,
            rows: rows.len(),
        });
    }
    let manifest = Manifest {
        schema: schema.clone(),
        schema_hash: schema.hash(),
        seed,
        tables,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load(dir: impl AsRef<Path>) -> Result<Database> {
    Ok(load_with_manifest(dir)?.0)
}

pub fn load_with_manifest(dir: impl AsRef<Path>) -> Result<(Database, Manifest)> {
    let dir = dir.as_ref();
    let mpath = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.schema.hash() != manifest.schema_hash {
        return Err(Error::Format {
            path: mpath,
            reason: "schema hash does not match the embedded schema".into(),
        });
    }
    let mut rows = BTreeMap::new();
    for tf in &manifest.tables {
        let path = dir.join(&tf.file);
        let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut table_rows = Vec::with_capacity(tf.rows);
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            table_rows.push(serde_json::from_str::<Vec<i64>>(&line)?);
        }
        if table_rows.len() != tf.rows {
            return Err(Error::Format {
                path,
                reason: format!("expected {} rows, found {}", tf.rows, table_rows.len()),
            });
        }
        rows.insert(tf.name.clone(), table_rows);
    }
    let db = Database::new(manifest.schema.clone(), rows)?;
    Ok((db, manifest))
}
