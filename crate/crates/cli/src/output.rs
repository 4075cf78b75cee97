//! CSV tables with `#` metadata lines.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const VERSION_LINE_PREFIX: &str = "# tool: ";

/// Provenance written at the top of every table.
#[derive(Clone, Debug)]
pub struct Metadata {
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header of {}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn write_to<W: Write>(&self, mut out: W, meta: &Metadata) -> Result<(), csv::Error> {
        writeln!(out, "{VERSION_LINE_PREFIX}{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))?;
        writeln!(out, "# command: {}", meta.command)?;
        writeln!(out, "# table: {}", self.name)?;
        writeln!(out, "# config_sha256: {}", meta.config_hash)?;
        writeln!(out, "# seed: {}", meta.seed)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, dir: &Path, meta: &Metadata) -> Result<PathBuf, csv::Error> {
        let path = dir.join(self.file_name());
        self.write_to(BufWriter::new(File::create(&path)?), meta)?;
        Ok(path)
    }
}

/// Shortest round-trip decimal; independent of locale.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

pub fn int(v: usize) -> String {
    v.to_string()
}
