//! Result rows and their CSV / JSON serialisation.
//!
//! Reals are written with 17 significant digits (`{:.16e}`), so a value
//! read back from either format is bit-identical. Non-finite reals become an
//! empty CSV field and `null` in JSON.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i128),
    Real(f64),
    Bool(bool),
    Text(String),
    Missing,
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i128)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i128)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Missing, Into::into)
    }
}

pub fn format_real(x: f64) -> Option<String> {
    x.is_finite().then(|| format!("{x:.16e}"))
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Real(x) => format_real(*x).unwrap_or_default(),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Value::Text(s) => s.clone(),
            Value::Missing => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Real(x) => format_real(*x).unwrap_or_else(|| "null".into()),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) => serde_json::Value::String(s.clone()).to_string(),
            Value::Missing => "null".into(),
        }
    }
}

/// One result row: ordered columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row(pub Vec<(String, Value)>);

impl Row {
    pub fn new() -> Self {
        Row::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.0.push((key.to_string(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn prepend(&mut self, key: &str, value: impl Into<Value>) {
        self.0.insert(0, (key.to_string(), value.into()));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

impl Format {
    pub fn file_name(self) -> &'static str {
        match self {
            Format::Csv => "results.csv",
            Format::Json => "results.json",
        }
    }
}

/// Union of the row columns in order of first appearance.
fn columns(rows: &[Row]) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for row in rows {
        for (k, _) in &row.0 {
            if !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    cols
}

pub fn to_csv(rows: &[Row]) -> String {
    let cols = columns(rows);
    let mut out = cols.join(",");
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = cols
            .iter()
            .map(|c| row.get(c).map(Value::csv).unwrap_or_default())
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json(rows: &[Row]) -> String {
    let mut out = String::from("[\n");
    for (i, row) in rows.iter().enumerate() {
        out.push_str("  {");
        for (j, (k, v)) in row.0.iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{}: {}", serde_json::Value::String(k.clone()), v.json());
        }
        out.push('}');
        if i + 1 < rows.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]\n");
    out
}

pub fn write_results(dir: &Path, format: Format, rows: &[Row]) -> Result<std::path::PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format.file_name());
    let body = match format {
        Format::Csv => to_csv(rows),
        Format::Json => to_json(rows),
    };
    std::fs::write(&path, body)?;
    Ok(path)
}
