//! Tabular results, written as CSV or as JSON records.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use ordinal_core::ExtReal;
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<ExtReal> for Cell {
    fn from(x: ExtReal) -> Self {
        Cell::Real(x.to_f64())
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

/// 17 significant digits, so every f64 round-trips.
fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Real(x) => format_real(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Real(x) if x.is_finite() => Value::from(*x),
            Cell::Real(x) => Value::from(format_real(*x)),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self::with_columns(columns.iter().map(|c| c.to_string()).collect())
    }

    pub fn with_columns(columns: Vec<String>) -> Self {
        Table { columns, rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> anyhow::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_csv))?;
        }
        Ok(w.into_inner()?)
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let record: Map<String, Value> =
                        self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.to_json())).collect();
                    Value::Object(record)
                })
                .collect(),
        )
    }

    pub fn render(&self, json: bool) -> anyhow::Result<Vec<u8>> {
        if json {
            let mut bytes = serde_json::to_vec_pretty(&self.to_json())?;
            bytes.push(b'\n');
            Ok(bytes)
        } else {
            self.to_csv()
        }
    }
}

/// Writes to a temporary file next to `path` and renames it into place, so a
/// failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn emit(table: &Table, json: bool, out: Option<&Path>) -> anyhow::Result<()> {
    let bytes = table.render(json)?;
    match out {
        Some(path) => write_atomic(path, &bytes),
        None => {
            std::io::stdout().lock().write_all(&bytes)?;
            Ok(())
        }
    }
}
