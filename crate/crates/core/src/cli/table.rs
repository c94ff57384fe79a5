//! Row-oriented result tables with CSV and JSON writers.

use crate::cylinder::{Discretization, GridSignature};
use crate::error::{CknError, Result};
use crate::params::CknParams;
use serde_json::{json, Map, Value};
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(x) => json!(x.to_string()),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub grid: Option<GridSignature>,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    /// Appends a row given as `(column, value)` pairs; missing columns are
    /// left empty.
    pub fn push(&mut self, grid: Option<GridSignature>, values: Vec<(&str, Cell)>) {
        let mut cells = vec![Cell::Empty; self.columns.len()];
        for (k, v) in values {
            let i = self
                .columns
                .iter()
                .position(|c| *c == k)
                .unwrap_or_else(|| panic!("unknown column {k}"));
            cells[i] = v;
        }
        self.rows.push(Row { cells, grid });
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| &r.cells[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| CknError::Parse(e.to_string());
        out.write_record(&self.columns).map_err(err)?;
        for row in &self.rows {
            out.write_record(row.cells.iter().map(Cell::csv)).map_err(err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(
        &self,
        mut w: W,
        command: &str,
        disc: &Discretization,
        params: &[CknParams],
    ) -> Result<()> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(&row.cells) {
                    m.insert((*c).to_string(), v.json());
                }
                m.insert("grid".into(), serde_json::to_value(row.grid).unwrap_or(Value::Null));
                Value::Object(m)
            })
            .collect();
        let doc = json!({
            "meta": {
                "version": env!("CARGO_PKG_VERSION"),
                "command": command,
                "grid": disc,
                "params": params.iter().map(|c| json!({"n": c.n, "p": c.p})).collect::<Vec<_>>(),
            },
            "rows": rows,
        });
        serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| CknError::Parse(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["n", "p", "x", "error"]);
        t.push(None, vec![("n", 3usize.into()), ("p", 4.0.into()), ("x", 0.5.into())]);
        t.push(None, vec![("n", 2usize.into()), ("error", "boom".into())]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "n,p,x,error\n3,4e0,5e-1,\n2,,,boom\n");
    }

    #[test]
    fn json_has_meta_and_rows() {
        let mut t = Table::new(&["v"]);
        t.push(None, vec![("v", f64::NAN.into())]);
        let mut buf = Vec::new();
        t.write_json(&mut buf, "x", &Discretization::default(), &[]).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["meta"]["command"], "x");
        assert_eq!(v["rows"][0]["v"], "NaN");
    }
}
