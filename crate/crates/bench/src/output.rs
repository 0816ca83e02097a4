//! Result rows, failure records, the run manifest and their on-disk forms.
//!
//! Every file is written to a temporary sibling and renamed into place, so an
//! interrupted run never leaves a partially written row behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::BenchError;

/// Column order of the results table; bump [`SCHEMA_VERSION`] when it changes.
pub const CSV_COLUMNS: [&str; 8] = [
    "experiment",
    "method",
    "parameter",
    "parameter_value",
    "seed",
    "metric",
    "value",
    "seconds",
];

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    /// Name of the swept parameter, e.g. `p` or `snr_db`.
    pub parameter: String,
    pub parameter_value: f64,
    pub seed: u64,
    pub metric: String,
    /// Always finite.
    pub value: f64,
    /// Wall time of the computation that produced the row; the only
    /// non-reproducible column.
    pub seconds: f64,
}

/// An estimator or metric failure at one parameter point. The sweep continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub experiment: String,
    pub method: String,
    pub parameter: String,
    pub parameter_value: f64,
    pub seed: u64,
    pub error: String,
}

/// A named side output such as a scatter CSV or a spectra table.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<FailureRecord>,
    pub artifacts: Vec<Artifact>,
}

impl ExperimentOutput {
    pub fn extend(&mut self, other: ExperimentOutput) {
        self.rows.extend(other.rows);
        self.failures.extend(other.failures);
        self.artifacts.extend(other.artifacts);
    }

    /// Rows matching `method` and `metric`.
    pub fn select<'a>(&'a self, method: &'a str, metric: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.method == method && r.metric == metric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub code_version: String,
    pub columns: Vec<String>,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub results_file: String,
    pub artifacts: Vec<String>,
    pub rows: usize,
    pub failures: Vec<FailureRecord>,
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> BenchError {
    BenchError::Io(format!("{}: {e}", path.display()))
}

/// Writes `contents` to `path` via a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), BenchError> {
    let tmp = path.with_extension(format!(
        "{}.partial",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(contents).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<Vec<u8>, BenchError> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    for r in rows {
        wr.serialize(r).map_err(|e| BenchError::Io(e.to_string()))?;
    }
    if rows.is_empty() {
        wr.write_record(CSV_COLUMNS).map_err(|e| BenchError::Io(e.to_string()))?;
    }
    wr.into_inner().map_err(|e| BenchError::Io(e.to_string()))
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<ResultRow>, BenchError> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    rd.deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .map_err(|e| io_err(path, e))
}

/// Writes the results table, artifacts and manifest into `cfg.out_dir`.
/// Returns the manifest path.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    output: &ExperimentOutput,
    format: Format,
    threads: usize,
    started_unix_s: f64,
) -> Result<PathBuf, BenchError> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let results_file = format!("{}.{}", cfg.kind, format.extension());
    let body = match format {
        Format::Csv => rows_to_csv(&output.rows)?,
        Format::Json => serde_json::to_vec_pretty(&output.rows).map_err(|e| BenchError::Io(e.to_string()))?,
    };
    write_atomic(&dir.join(&results_file), &body)?;
    for a in &output.artifacts {
        write_atomic(&dir.join(&a.file_name), &a.contents)?;
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        columns: CSV_COLUMNS.iter().map(|c| c.to_string()).collect(),
        config: cfg.clone(),
        seeds: cfg.seeds.clone(),
        threads,
        started_unix_s,
        finished_unix_s: unix_now(),
        results_file,
        artifacts: output.artifacts.iter().map(|a| a.file_name.clone()).collect(),
        rows: output.rows.len(),
        failures: output.failures.clone(),
    };
    let path = dir.join(format!("{}_manifest.json", cfg.kind));
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| BenchError::Io(e.to_string()))?;
    write_atomic(&path, &json)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, value: f64) -> ResultRow {
        ResultRow {
            experiment: "tune_p".into(),
            method: "fast1".into(),
            parameter: "p".into(),
            parameter_value: 11.0,
            seed,
            metric: "spectrum_sq_error".into(),
            value,
            seconds: 0.5,
        }
    }

    #[test]
    fn csv_header_matches_declared_columns() {
        let bytes = rows_to_csv(&[row(0, 1.5)]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
        let empty = String::from_utf8(rows_to_csv(&[]).unwrap()).unwrap();
        assert_eq!(empty.trim_end(), CSV_COLUMNS.join(","));
    }

    #[test]
    fn atomic_write_leaves_no_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows = vec![row(0, 1.0), row(1, 0.25)];
        write_atomic(&path, &rows_to_csv(&rows).unwrap()).unwrap();
        assert_eq!(read_rows_csv(&path).unwrap(), rows);
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }
}
