//! Plain CSV tables with a provenance comment line.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{io_err, CliError};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self { name: name.to_string(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, banner: &str) -> String {
        let mut out = String::new();
        out.push_str(banner);
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| escape(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest representation that round-trips.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn int(x: u64) -> String {
    x.to_string()
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

pub fn banner(command: &str, config_hash: u64, seed: u64) -> String {
    format!(
        "# fwdsmile {} command={command} config_hash={config_hash:016x} seed={seed}",
        env!("CARGO_PKG_VERSION")
    )
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(&path))?;
    Ok(path)
}
