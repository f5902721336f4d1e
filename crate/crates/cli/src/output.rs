//! Tabular results rendered as aligned text, CSV or JSON.

use std::io::{self, Write};

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    List(Vec<f64>),
    Null,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Cell {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Cell {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Cell {
        Cell::Text(v)
    }
}

impl From<Vec<f64>> for Cell {
    fn from(v: Vec<f64>) -> Cell {
        Cell::List(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Cell {
        v.map_or(Cell::Null, Cell::Num)
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        // adding zero turns −0 into +0
        format!("{:.16e}", v + 0.0)
    } else {
        v.to_string()
    }
}

impl Cell {
    fn to_json(&self) -> Value {
        match self {
            Cell::Num(v) => num(*v),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
            Cell::List(v) => Value::Array(v.iter().map(|x| num(*x)).collect()),
            Cell::Null => Value::Null,
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::List(v) => v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";"),
            Cell::Null => String::new(),
        }
    }

    fn to_text(&self) -> String {
        match self {
            Cell::Num(v) => format!("{:.6e}", v + 0.0),
            Cell::List(v) => format!("({})", v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")),
            Cell::Null => "-".to_string(),
            other => other.to_csv(),
        }
    }
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// Results of one command run.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Vec<(String, Cell)>,
    /// Free-form lines shown in text output only.
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Report {
        Report { title: title.into(), columns: columns.iter().map(|c| c.to_string()).collect(), ..Report::default() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn summarize(&mut self, key: &str, value: impl Into<Cell>) {
        self.summary.push((key.to_string(), value.into()));
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn render<W: Write>(&self, format: Format, config: &Value, out: &mut W) -> io::Result<()> {
        match format {
            Format::Json => self.render_json(config, out),
            Format::Csv => self.render_csv(out),
            Format::Text => self.render_text(out),
        }
    }

    fn render_json<W: Write>(&self, config: &Value, out: &mut W) -> io::Result<()> {
        let results: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let map: Map<String, Value> =
                    self.columns.iter().zip(row).map(|(c, v)| (c.clone(), v.to_json())).collect();
                Value::Object(map)
            })
            .collect();
        let summary: Map<String, Value> = self.summary.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        let mut top = Map::new();
        top.insert("config".into(), config.clone());
        top.insert("results".into(), Value::Array(results));
        top.insert("summary".into(), Value::Object(summary));
        let mut ser = serde_json::Serializer::with_formatter(&mut *out, SignificantDigits);
        serde::Serialize::serialize(&Value::Object(top), &mut ser).map_err(io::Error::other)?;
        writeln!(out)
    }

    fn render_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.iter().map(Cell::to_csv).collect::<Vec<_>>().join(","))?;
        }
        Ok(())
    }

    fn render_text<W: Write>(&self, out: &mut W) -> io::Result<()> {
        if !self.title.is_empty() {
            writeln!(out, "{}", self.title)?;
        }
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::to_text).collect()).collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(k, c)| cells.iter().map(|r| r[k].chars().count()).chain([c.chars().count()]).max().unwrap_or(0))
            .collect();
        if !self.rows.is_empty() {
            let line = |items: Vec<&str>| -> String {
                items.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect::<Vec<_>>().join("  ")
            };
            writeln!(out, "{}", line(self.columns.iter().map(String::as_str).collect()))?;
            for row in &cells {
                writeln!(out, "{}", line(row.iter().map(String::as_str).collect()))?;
            }
        }
        for (k, v) in &self.summary {
            writeln!(out, "{k}: {}", v.to_text())?;
        }
        for n in &self.notes {
            writeln!(out, "{n}")?;
        }
        Ok(())
    }
}

/// Compact JSON with floats printed to 17 significant digits.
struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
}
