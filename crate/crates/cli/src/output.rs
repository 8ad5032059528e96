use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Header plus string rows, written in one go.
pub(crate) struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: Vec<String>) -> Self {
        Table {
            name: name.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<OutputEntry, CliError> {
        let path = dir.join(&self.name);
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|source| CliError::Io { path, source })?;
        Ok(OutputEntry {
            file: self.name.clone(),
            rows: Some(self.rows.len()),
            columns: Some(self.columns.clone()),
        })
    }
}

/// Shortest round-trip text; exponent form outside `[1e-5, 1e15)`.
pub(crate) fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
}

impl OutputEntry {
    pub fn file(name: &str) -> Self {
        OutputEntry {
            file: name.to_string(),
            rows: None,
            columns: None,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize, S: Serialize> {
    schema: u32,
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    seed: String,
    config: &'a C,
    outputs: &'a [OutputEntry],
    summary: &'a S,
}

pub(crate) fn write_manifest<C: Serialize, S: Serialize>(
    dir: &Path,
    subcommand: &str,
    seed: u64,
    config: &C,
    outputs: &[OutputEntry],
    summary: &S,
) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{subcommand}.json"));
    let manifest = Manifest {
        schema: 1,
        tool: "aquid",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        seed: format!("{seed:#x}"),
        config,
        outputs,
        summary,
    };
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_error(&path))?;
    Ok(path)
}
