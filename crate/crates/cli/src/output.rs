//! Run artifacts: in-memory files, plot data and the run record.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use polarlab_core::digest::bytes_digest;
use polarlab_core::io::write_table_csv;
use serde::Serialize;

use crate::error::CliError;

/// A file produced by a subcommand, held in memory until the run succeeds.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Artifact {
            name: name.into(),
            bytes,
        }
    }

    pub fn csv<S: AsRef<str>>(
        name: impl Into<String>,
        header: &[S],
        rows: &[Vec<String>],
    ) -> Result<Self, CliError> {
        let mut buf = Vec::new();
        write_table_csv(header, rows, &mut buf)?;
        Ok(Artifact::new(name, buf))
    }

    pub fn json<T: Serialize>(name: impl Into<String>, value: &T) -> Self {
        let mut text = serde_json::to_string_pretty(value).expect("serializable summary");
        text.push('\n');
        Artifact::new(name, text.into_bytes())
    }
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// One block of a gnuplot data file.
#[derive(Debug, Clone, Default)]
pub struct Series {
    pub label: String,
    pub rows: Vec<Vec<f64>>,
}

/// Whitespace-separated columns. Series are separated by two blank lines so
/// gnuplot can address them with `index`; `trailer` lines become comments.
pub fn plot_data(columns: &[&str], series: &[Series], trailer: &[String]) -> String {
    let mut out = format!("# {}\n", columns.join(" "));
    for (i, s) in series.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        if !s.label.is_empty() {
            let _ = writeln!(out, "# {}", s.label);
        }
        for row in &s.rows {
            let cells: Vec<String> = row.iter().map(|v| num(*v)).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
    }
    for line in trailer {
        let _ = writeln!(out, "# {line}");
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub subcommand: String,
    pub config_digest: String,
    pub seed: u64,
    pub seed_generated: bool,
    pub tool_version: String,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<ManifestEntry>,
}

pub fn manifest(artifacts: &[Artifact]) -> Vec<ManifestEntry> {
    artifacts
        .iter()
        .map(|a| ManifestEntry {
            path: a.name.clone(),
            bytes: a.bytes.len(),
            sha256: bytes_digest(&a.bytes),
        })
        .collect()
}

/// Writes every artifact into `dir`. On failure the files written so far, and
/// the directory if this call created it, are removed.
pub fn persist(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    let created_dir = !dir.exists();
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.name);
        if let Err(e) = fs::write(&path, &a.bytes) {
            discard(&written, created_dir.then_some(dir));
            return Err(CliError::Io(format!("{}: {e}", path.display())));
        }
        written.push(path);
    }
    Ok(written)
}

pub fn discard(files: &[PathBuf], dir: Option<&Path>) {
    for f in files {
        let _ = fs::remove_file(f);
    }
    if let Some(d) = dir {
        let _ = fs::remove_dir(d);
    }
}
