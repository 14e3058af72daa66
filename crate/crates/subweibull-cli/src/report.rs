//! Tables and documents with CSV/JSON emission and a provenance footer.

use serde_json::{json, Map, Value};

use crate::config::Format;
use crate::CliError;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "-g", env!("SUBWEIBULL_GIT_REV"));

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
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

/// Shortest round-trip decimal; exponent form outside [1e-4, 1e15); inf, -inf, nan spelled out.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// JSON number, or the CSV spelling for non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_num(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Table(Table),
    Doc(Value),
}

impl Report {
    fn default_format(&self) -> Format {
        match self {
            Report::Table(_) => Format::Csv,
            Report::Doc(_) => Format::Json,
        }
    }
}

/// Renders a report with its footer. A document rendered as CSV becomes `key,value` rows of its leaves.
pub fn render(report: &Report, format: Option<Format>, command: &str, config: &Value) -> Result<String, CliError> {
    match format.unwrap_or_else(|| report.default_format()) {
        Format::Csv => {
            let table = match report {
                Report::Table(t) => t.clone(),
                Report::Doc(v) => {
                    let mut t = Table::new(&["key", "value"]);
                    flatten("", v, &mut t);
                    t
                }
            };
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Io(e.to_string());
            w.write_record(&table.columns).map_err(io)?;
            for r in &table.rows {
                w.write_record(r.iter().map(Cell::csv)).map_err(io)?;
            }
            let mut out = String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?)
                .map_err(|e| CliError::Io(e.to_string()))?;
            out.push_str(&format!("# command: {command}\n# config: {config}\n# version: subweibull {VERSION}\n"));
            Ok(out)
        }
        Format::Json => {
            let body = match report {
                Report::Table(t) => {
                    let rows: Vec<Value> = t
                        .rows
                        .iter()
                        .map(|r| Value::Object(t.columns.iter().zip(r).map(|(c, v)| (c.to_string(), v.json())).collect()))
                        .collect();
                    json!({ "columns": t.columns, "rows": rows })
                }
                Report::Doc(v) => v.clone(),
            };
            let mut top = Map::new();
            top.insert("command".into(), json!(command));
            top.insert("result".into(), body);
            top.insert("provenance".into(), json!({ "config": config, "version": format!("subweibull {VERSION}") }));
            let mut s = serde_json::to_string_pretty(&Value::Object(top)).map_err(|e| CliError::Io(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

fn flatten(prefix: &str, v: &Value, t: &mut Table) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(&key(k), x, t)),
        Value::Array(xs) => xs.iter().enumerate().for_each(|(i, x)| flatten(&key(&i.to_string()), x, t)),
        Value::Number(n) => t.push(vec![prefix.into(), Cell::Text(n.to_string())]),
        Value::String(s) => t.push(vec![prefix.into(), s.as_str().into()]),
        Value::Bool(b) => t.push(vec![prefix.into(), (*b).into()]),
        Value::Null => t.push(vec![prefix.into(), "".into()]),
    }
}
