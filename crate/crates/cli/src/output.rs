//! Tab-separated tables with `#` comment headers and JSON run manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Resolved;
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "seqcrypt";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest representation that parses back to the same `f64`; very large
/// or small magnitudes switch to exponent form.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub comments: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, key: &str, value: impl ToString) {
        self.comments.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.comments {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join("\t"));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join("\t"));
        }
        out
    }
}

/// A parsed table: comment pairs, header and raw cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTable {
    pub comments: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedTable {
    pub fn parse(text: &str) -> Option<Self> {
        let mut comments = Vec::new();
        let mut lines = text.lines();
        let header = loop {
            let line = lines.next()?;
            match line.strip_prefix("# ") {
                Some(c) => {
                    let (k, v) = c.split_once(": ")?;
                    comments.push((k.to_string(), v.to_string()));
                }
                None => break line,
            }
        };
        let columns: Vec<String> = header.split('\t').map(str::to_string).collect();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| l.split('\t').map(str::to_string).collect())
            .collect();
        Some(Self {
            comments,
            columns,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn comment(&self, key: &str) -> Option<&str> {
        self.comments
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn f64_at(&self, row: usize, name: &str) -> Option<f64> {
        self.rows.get(row)?.get(self.column(name)?)?.parse().ok()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    name: &'a str,
    inputs: &'a Resolved,
    outputs: Vec<String>,
    results: &'a serde_json::Value,
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<name>.tsv` and `<name>.manifest.json` into the output directory.
pub fn emit(
    inputs: &Resolved,
    name: &str,
    table: &Table,
    results: &serde_json::Value,
) -> CliResult<Vec<PathBuf>> {
    let dir = &inputs.output_path;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let data_name = format!("{name}.tsv");
    let data_path = dir.join(&data_name);
    let manifest_path = dir.join(format!("{name}.manifest.json"));
    write_file(&data_path, &table.render())?;
    let manifest = Manifest {
        tool: TOOL,
        version: VERSION,
        name,
        inputs,
        outputs: vec![data_name],
        results,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_file(&manifest_path, &json)?;
    Ok(vec![data_path, manifest_path])
}
