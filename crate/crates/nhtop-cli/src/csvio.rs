//! Minimal CSV writing and reading for the numeric tables this tool emits.
//!
//! Values are plain floats, integers, or short labels with no commas or
//! quotes, so no quoting layer is needed.  Floats are written with Rust's
//! shortest round-trip `Display`, which keeps reruns byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

/// A cell in a CSV row.
#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    /// Empty cell (a value that does not apply to this row).
    Blank,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Cell {
        Cell::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Cell {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Cell {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Cell {
        Cell::Text(s.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Cell {
        match x {
            Some(v) => Cell::Float(v),
            None => Cell::Blank,
        }
    }
}

/// Render a header and rows to CSV text.
pub fn render(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let mut first = true;
        for cell in row {
            if !first {
                out.push(',');
            }
            first = false;
            match cell {
                Cell::Int(v) => {
                    let _ = write!(out, "{v}");
                }
                Cell::Float(v) => {
                    let _ = write!(out, "{v}");
                }
                Cell::Text(s) => out.push_str(s),
                Cell::Blank => {}
            }
        }
        out.push('\n');
    }
    out
}

/// A CSV file read back as strings.
#[derive(Debug)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// Index of a named column, or a validation error naming it.
    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Validation(format!("missing column `{name}`")))
    }
}

/// Read a CSV file produced by this tool (or shaped like one).
pub fn read(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Validation(format!("{} is empty", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if row.len() != header.len() {
            return Err(CliError::Validation(format!(
                "{}: row has {} cells but the header has {}",
                path.display(),
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}
