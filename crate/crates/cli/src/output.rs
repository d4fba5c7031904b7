//! CSV and JSON writers with fixed float formatting.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{Map, Value};
use spinphase::VERSION;

pub const UNITS: &str =
    "energies in gamma_S*B, polarizations in hbar, time in 1/(gamma_S*B0), phases in radians, lambda and eta dimensionless";

/// 15 significant digits, printed in the shortest form that round-trips the rounded value.
pub fn fmt_f64(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let r: f64 = format!("{x:.14e}").parse().expect("formatted float parses");
    if (1e-4..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// m as it appears in column names: 2, -1, 3/2, -1/2.
pub fn fmt_m(m: f64) -> String {
    let twice = (2.0 * m).round() as i64;
    if twice % 2 == 0 {
        format!("{}", twice / 2)
    } else {
        format!("{twice}/2")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

/// A curve: named columns, one row per sample, plus free-text header notes.
#[derive(Debug, Clone)]
pub struct Table {
    pub command: &'static str,
    pub notes: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(command: &'static str, columns: Vec<String>) -> Self {
        Self { command, notes: vec![], columns, rows: vec![] }
    }

    pub fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "# spinphase {VERSION} {}", self.command)?;
        writeln!(w, "# units: {UNITS}")?;
        for n in &self.notes {
            writeln!(w, "# {n}")?;
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| Value::Object(self.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect()))
            .collect();
        let mut obj = header(self.command);
        obj.insert("notes".into(), Value::from(self.notes.clone()));
        obj.insert("rows".into(), Value::Array(rows));
        Value::Object(obj)
    }
}

/// Leading keys shared by every JSON document.
pub fn header(command: &str) -> Map<String, Value> {
    let mut obj = Map::new();
    obj.insert("tool".into(), Value::from("spinphase"));
    obj.insert("version".into(), Value::from(VERSION));
    obj.insert("command".into(), Value::from(command));
    obj.insert("units".into(), Value::from(UNITS));
    obj
}

fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let r: f64 = fmt_f64(x).parse().expect("formatted float parses");
    Value::from(r)
}

/// Apply the float formatting rule to every number in a JSON tree.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => num(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

pub fn write_json(v: &Value, w: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, &round_floats(v.clone()))?;
    writeln!(w)?;
    Ok(())
}

/// Run `f` against the output file, or stdout when no path is given.
pub fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().with_context(|| format!("cannot write {}", p.display()))?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}
