//! Report rendering (JSON or CSV) and atomic output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Echoed at the top of every output so a run can be reproduced from the file alone.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub command: String,
    pub version: &'static str,
    pub input: String,
    pub input_sha256: String,
    pub seed: u64,
    pub flags: BTreeMap<String, Value>,
}

/// A tabular view of a result, used for `--format csv`.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// Two-column `key,value` view of the scalar fields of an object.
    pub fn from_scalars(value: &Value) -> Self {
        let mut t = Table::new(&["key", "value"]);
        if let Value::Object(map) = value {
            for (k, v) in map {
                if !(v.is_object() || v.is_array()) {
                    t.push(vec![k.clone(), scalar(v)]);
                }
            }
        }
        t
    }
}

/// CSV rendering of a JSON scalar; strings are written bare.
pub fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub struct Report {
    pub result: Value,
    pub table: Option<Table>,
    /// Set when an identity check exceeded its tolerance; the report is still written.
    pub check_failure: Option<String>,
    /// Replaces the JSON rendering entirely (used for JSON-lines samples).
    pub raw: Option<String>,
}

impl Report {
    pub fn new<T: Serialize>(result: &T) -> Self {
        Self {
            result: serde_json::to_value(result).expect("result serializes"),
            table: None,
            check_failure: None,
            raw: None,
        }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn check(mut self, name: &str, discrepancy: f64, tol: f64) -> Self {
        if !(discrepancy <= tol) && self.check_failure.is_none() {
            self.check_failure = Some(format!("{name}: discrepancy {discrepancy:e} exceeds tolerance {tol:e}"));
        }
        self
    }

    pub fn render(&self, header: &Header, format: Format) -> String {
        match format {
            Format::Json => {
                if let Some(raw) = &self.raw {
                    let mut out = serde_json::to_string(header).expect("header serializes");
                    out.push('\n');
                    out.push_str(raw);
                    return out;
                }
                let doc = serde_json::json!({ "header": header, "result": self.result });
                let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
                out.push('\n');
                out
            }
            Format::Csv => {
                let table = self.table.clone().unwrap_or_else(|| Table::from_scalars(&self.result));
                let mut out = format!("# {}\n", serde_json::to_string(header).expect("header serializes"));
                out.push_str(&table.columns.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
                out.push('\n');
                for row in &table.rows {
                    out.push_str(&row.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
                    out.push('\n');
                }
                out
            }
        }
    }
}

/// Writes `contents` to `path` through a temporary file in the same directory and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Failure::internal(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
