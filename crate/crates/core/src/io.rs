//! Artifact writers: a self-describing binary column store and plain CSV.
//!
//! Column store layout: the 8-byte magic `APCOLS01`, a little-endian `u64` header length,
//! the JSON header (which lists every column name and length), then each column as
//! little-endian `f64` in header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const COLUMN_STORE_MAGIC: &[u8; 8] = b"APCOLS01";

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnStore {
    pub header: Value,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl ColumnStore {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

pub fn write_column_store(path: &Path, store: &ColumnStore) -> Result<()> {
    let mut header = store.header.clone();
    let layout: Vec<Value> = store.columns.iter().map(|(n, v)| json!({"name": n, "len": v.len()})).collect();
    match header.as_object_mut() {
        Some(obj) => {
            obj.insert("columns".into(), Value::Array(layout));
        }
        None => header = json!({ "meta": header, "columns": layout }),
    }
    let bytes = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(COLUMN_STORE_MAGIC)?;
    w.write_all(&(bytes.len() as u64).to_le_bytes())?;
    w.write_all(&bytes)?;
    for (_, col) in &store.columns {
        for v in col {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_column_store(path: &Path) -> Result<ColumnStore> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != COLUMN_STORE_MAGIC {
        return Err(Error::InvalidArgument(format!("{} is not a column store", path.display())));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut hdr = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut hdr)?;
    let header: Value = serde_json::from_slice(&hdr)?;
    let layout = header
        .get("columns")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidArgument("column store header lacks a column list".into()))?;
    let mut columns = Vec::with_capacity(layout.len());
    for c in layout {
        let name = c.get("name").and_then(Value::as_str).unwrap_or_default().to_string();
        let n = c.get("len").and_then(Value::as_u64).unwrap_or(0) as usize;
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw)?;
        let vals = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        columns.push((name, vals));
    }
    Ok(ColumnStore { header, columns })
}

pub fn write_csv<I>(path: &Path, headers: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(headers).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}
