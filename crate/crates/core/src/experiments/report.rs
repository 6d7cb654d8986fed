//! Study reports and their on-disk layout.
//!
//! A results directory holds `config.echo.json`, `result.json`, one CSV per
//! table, a `MANIFEST` of `sha256  filename` lines over all of those, and a
//! `timing.json` with wall-clock runtime. Timing is kept out of the manifest
//! so that repeated runs hash identically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::lattice::Model;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes `# <compact json>` as the first line of a CSV.
pub fn write_metadata_line<W: Write>(mut out: W, metadata: &Value) -> std::io::Result<()> {
    writeln!(out, "# {metadata}")
}

/// First 16 hex digits of the SHA-256 of the model description.
pub fn model_hash(model: &Model) -> String {
    let digest = Sha256::digest(model.describe().to_string().as_bytes());
    hex::encode(&digest[..8])
}

pub fn metadata(model: &Model, seed: Option<u64>, horizon: Option<f64>) -> Value {
    let g = model.geometry();
    json!({
        "model": model.describe(),
        "family": model.family().name(),
        "d": g.dim(),
        "n": g.side(),
        "p": model.p(),
        "seed": seed,
        "horizon": horizon,
        "model_hash": model_hash(model),
        "code_version": CODE_VERSION,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        self.rows.push(row.into_iter().map(|c| c.to_string()).collect());
    }

    pub fn write_csv<W: Write>(&self, metadata: &Value, mut out: W) -> std::io::Result<()> {
        write_metadata_line(&mut out, metadata)?;
        writeln!(out, "{}", self.header.join(","))?;
        for r in &self.rows {
            writeln!(out, "{}", r.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyReport {
    pub study: String,
    pub metadata: Value,
    pub parameters: Value,
    pub results: Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
    /// Extra long-format tables for plotting, written only on request.
    #[serde(skip)]
    pub plot_tables: Vec<Table>,
    #[serde(skip)]
    pub runtime_seconds: f64,
}

impl StudyReport {
    pub fn new(study: &str, metadata: Value, parameters: Value, results: Value) -> Self {
        Self {
            study: study.to_string(),
            metadata,
            parameters,
            results,
            tables: Vec::new(),
            plot_tables: Vec::new(),
            runtime_seconds: 0.0,
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes a report under `root/<study>-<timestamp>-seed<seed>/` and returns the directory.
pub fn write_report(
    root: &Path,
    report: &StudyReport,
    config_echo: &Value,
    seed: u64,
    plot_data: bool,
) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let base = format!("{}-{stamp}-seed{seed}", report.study);
    let mut dir = root.join(&base);
    let mut k = 1;
    while dir.exists() {
        dir = root.join(format!("{base}-{k}"));
        k += 1;
    }
    fs::create_dir_all(&dir)?;

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    files.push((
        "config.echo.json".into(),
        format!("{}\n", serde_json::to_string_pretty(config_echo)?).into_bytes(),
    ));
    files.push((
        "result.json".into(),
        format!("{}\n", serde_json::to_string_pretty(report)?).into_bytes(),
    ));
    let tables = report
        .tables
        .iter()
        .chain(report.plot_tables.iter().filter(|_| plot_data));
    for t in tables {
        let mut buf = Vec::new();
        t.write_csv(&report.metadata, &mut buf)?;
        files.push((format!("{}.csv", t.name), buf));
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    let mut manifest = String::new();
    for (name, bytes) in &files {
        fs::write(dir.join(name), bytes)?;
        manifest.push_str(&format!("{}  {}\n", sha256_hex(bytes), name));
    }
    fs::write(dir.join("MANIFEST"), manifest)?;
    fs::write(
        dir.join("timing.json"),
        format!(
            "{}\n",
            json!({ "study": report.study, "runtime_seconds": report.runtime_seconds })
        ),
    )?;
    Ok(dir)
}
