//! CSV emission.
//!
//! Every table starts with `#` comment lines: the tool version, the command
//! and each resolved setting as `key = value`. Then comes the column header
//! and one line per record. Reals are written in scientific notation with
//! 12 significant digits, so identical inputs give identical bytes.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
#[error("cannot write {path}: {source}")]
pub struct OutputError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

/// A column-named table ready for writing.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Table { columns, rows: Vec::new() }
    }

    /// Appends a row. Panics if its width does not match the schema.
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row does not match schema {:?}", self.columns);
        self.rows.push(row);
    }
}

/// Real number with 12 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.11e}")
}

/// The version line written first in every output.
pub fn version_line() -> String {
    format!("# {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

pub fn write_csv<W: Write>(mut out: W, command: &str, settings: &[(String, String)], table: &Table) -> io::Result<()> {
    writeln!(out, "{}", version_line())?;
    writeln!(out, "# command = {command}")?;
    for (key, value) in settings {
        writeln!(out, "# {key} = {value}")?;
    }
    writeln!(out, "{}", table.columns.join(","))?;
    for row in &table.rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()
}

/// Writes to `path`, attaching the path to any I/O error.
pub fn write_csv_file(path: &Path, command: &str, settings: &[(String, String)], table: &Table) -> Result<(), OutputError> {
    let wrap = |source| OutputError { path: path.to_owned(), source };
    let file = std::fs::File::create(path).map_err(wrap)?;
    write_csv(io::BufWriter::new(file), command, settings, table).map_err(wrap)
}
