//! Output files: CSV tables, whitespace-separated plot data and JSON reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Settings;
use crate::error::Result;

/// A named assertion and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value < threshold`.
    pub fn below(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value < threshold, value, threshold, detail: detail.into() }
    }

    /// Passes when `value > threshold`.
    pub fn above(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value > threshold, value, threshold, detail: detail.into() }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        let v = if passed { 1.0 } else { 0.0 };
        Self { name: name.into(), passed, value: v, threshold: 1.0, detail: detail.into() }
    }
}

/// Column-major table written as CSV with a commented parameter echo.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    fn csv(&self, echo: &str) -> String {
        let mut out = String::new();
        out.push_str(echo);
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| fmt_num(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Selected columns, whitespace separated; a blank line whenever
    /// `block_by` changes value, for surface plots.
    fn dat(&self, cols: &[&str], block_by: Option<&str>, echo: &str) -> String {
        let idx: Vec<usize> =
            cols.iter().filter_map(|c| self.columns.iter().position(|x| x == c)).collect();
        let block = block_by.and_then(|b| self.columns.iter().position(|x| x == b));
        let mut out = String::new();
        out.push_str(echo);
        let _ = writeln!(out, "# {}", cols.join(" "));
        let mut last: Option<f64> = None;
        for r in &self.rows {
            if let Some(b) = block {
                if last.is_some_and(|l| l != r[b]) {
                    out.push('\n');
                }
                last = Some(r[b]);
            }
            let cells: Vec<String> = idx.iter().map(|&j| fmt_num(r[j])).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Shortest representation that parses back to the same `f64`; empty for NaN.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

/// Collects the files of one run.
#[derive(Debug)]
pub struct Sink {
    dir: PathBuf,
    echo: String,
    files: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path, command: &str, settings: &Settings) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut echo = format!("# fracenv {} {command}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in settings.map() {
            let _ = writeln!(echo, "# {k} = {v}");
        }
        Ok(Self { dir: dir.to_path_buf(), echo, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        let text = table.csv(&self.echo);
        self.write(name, &text)
    }

    pub fn dat(&mut self, name: &str, table: &Table, cols: &[&str], block_by: Option<&str>) -> Result<()> {
        let text = table.dat(cols, block_by, &self.echo);
        self.write(name, &text)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }
}
