//! Locale-independent CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;

/// 17 significant digits in scientific notation, `.` as decimal separator.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Accumulates CSV rows with a fixed header; lines end in `\n`.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

/// One CSV cell.
pub enum Cell<'a> {
    Float(f64),
    Int(i64),
    Text(&'a str),
}

impl From<f64> for Cell<'_> {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell<'_> {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl<'a> From<&'a str> for Cell<'a> {
    fn from(x: &'a str) -> Self {
        Cell::Text(x)
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv {
            text,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        debug_assert_eq!(cells.len(), self.columns);
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match cell {
                Cell::Float(x) => self.text.push_str(&fmt_f64(*x)),
                Cell::Int(x) => {
                    let _ = write!(self.text, "{x}");
                }
                Cell::Text(t) => self.text.push_str(t),
            }
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        fs::write(path, self.text.as_bytes())?;
        Ok(())
    }
}

/// Single-column CSV of values.
pub fn column_csv(header: &str, values: &[f64]) -> Csv {
    let mut csv = Csv::new(&[header]);
    for &v in values {
        csv.row(&[v.into()]);
    }
    csv
}
