//! On-disk report formats.
//!
//! * `run_<method>_<seed>.csv`: `epoch,train_loss,train_acc,test_loss,test_acc`
//! * `params_<method>_<seed>.json`: pooling-parameter snapshots, see [`ParamsFile`]
//! * `summary.csv`: final-epoch accuracy per method, mean and sample
//!   standard deviation over seeds
//!
//! Floats are written in shortest round-trip form, so loading a report gives
//! back the in-memory values bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use poolbench_core::stats;
use poolbench_core::train::{Abort, EpochMetrics, ParamSnapshot, RunReport};
use poolbench_core::Method;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SUMMARY_FILE: &str = "summary.csv";

pub fn run_csv_path(dir: &Path, method: Method, seed: u64) -> PathBuf {
    dir.join(format!("run_{}_{seed}.csv", method.name()))
}

pub fn params_json_path(dir: &Path, method: Method, seed: u64) -> PathBuf {
    dir.join(format!("params_{}_{seed}.json", method.name()))
}

/// JSON layout of `params_<method>_<seed>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub method: String,
    pub seed: u64,
    pub aborted: Option<Abort>,
    pub entries: Vec<ParamsEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsEntry {
    pub method: String,
    /// 0-based pooling block, counted from the input.
    pub block: usize,
    pub name: String,
    pub values: Vec<f64>,
    pub initial: Vec<f64>,
}

impl ParamsFile {
    pub fn from_report(report: &RunReport) -> Self {
        let method = report.method.name().to_string();
        ParamsFile {
            method: method.clone(),
            seed: report.seed,
            aborted: report.aborted.clone(),
            entries: report
                .snapshots
                .iter()
                .map(|s| ParamsEntry {
                    method: method.clone(),
                    block: s.block,
                    name: s.name.clone(),
                    values: s.values.clone(),
                    initial: s.initial.clone(),
                })
                .collect(),
        }
    }

    pub fn method(&self) -> Result<Method> {
        self.method.parse().map_err(|e: poolbench_core::Error| CliError::Usage(e.to_string()))
    }

    pub fn snapshots(&self) -> Vec<ParamSnapshot> {
        self.entries
            .iter()
            .map(|e| ParamSnapshot {
                block: e.block,
                name: e.name.clone(),
                values: e.values.clone(),
                initial: e.initial.clone(),
            })
            .collect()
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn csv_bytes<T: Serialize>(path: &Path, comments: &[String], rows: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for c in comments {
        buf.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(buf);
    for row in rows {
        w.serialize(row).map_err(|e| CliError::format(path, e))?;
    }
    w.into_inner().map_err(|e| CliError::format(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| CliError::format(path, e))?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(|e| CliError::format(path, e))
}

pub fn write_run_csv(path: &Path, epochs: &[EpochMetrics]) -> Result<()> {
    write_file(path, &csv_bytes(path, &[], epochs)?)
}

pub fn read_run_csv(path: &Path) -> Result<Vec<EpochMetrics>> {
    read_csv(path)
}

pub fn write_params_json(path: &Path, file: &ParamsFile) -> Result<()> {
    let mut text = serde_json::to_string_pretty(file).map_err(|e| CliError::format(path, e))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_params_json(path: &Path) -> Result<ParamsFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e))
}

/// Writes both per-run files for `report` into `dir`.
pub fn write_run(dir: &Path, report: &RunReport) -> Result<()> {
    write_run_csv(&run_csv_path(dir, report.method, report.seed), &report.epochs)?;
    write_params_json(&params_json_path(dir, report.method, report.seed), &ParamsFile::from_report(report))
}

/// Inverse of [`write_run`].
pub fn read_run(dir: &Path, method: Method, seed: u64) -> Result<RunReport> {
    let epochs = read_run_csv(&run_csv_path(dir, method, seed))?;
    let path = params_json_path(dir, method, seed);
    let params = read_params_json(&path)?;
    if params.method()? != method || params.seed != seed {
        return Err(CliError::format(path, "method or seed does not match the file name"));
    }
    Ok(RunReport { method, seed, epochs, snapshots: params.snapshots(), aborted: params.aborted })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub mean_train_acc: f64,
    pub sd_train_acc: f64,
    pub mean_test_acc: f64,
    pub sd_test_acc: f64,
}

/// One row per method, in the order methods first appear in `reports`.
/// Diverged runs are left out; a method with no finished run gets NaN.
pub fn summarize(reports: &[RunReport]) -> Vec<SummaryRow> {
    let mut methods: Vec<Method> = Vec::new();
    for r in reports {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let finals: Vec<&EpochMetrics> =
                reports.iter().filter(|r| r.method == m && !r.diverged()).filter_map(|r| r.final_metrics()).collect();
            let train: Vec<f64> = finals.iter().map(|f| f.train_acc).collect();
            let test: Vec<f64> = finals.iter().map(|f| f.test_acc).collect();
            SummaryRow {
                method: m.name().to_string(),
                mean_train_acc: stats::mean(&train).unwrap_or(f64::NAN),
                sd_train_acc: stats::sample_sd(&train).unwrap_or(f64::NAN),
                mean_test_acc: stats::mean(&test).unwrap_or(f64::NAN),
                sd_test_acc: stats::sample_sd(&test).unwrap_or(f64::NAN),
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, reports: &[RunReport]) -> Result<()> {
    let mut comments =
        vec!["final-epoch accuracy; sd is the sample standard deviation over seeds (0 for a single seed)".to_string()];
    let diverged: Vec<String> =
        reports.iter().filter(|r| r.diverged()).map(|r| format!("{}/{}", r.method.name(), r.seed)).collect();
    if !diverged.is_empty() {
        comments.push(format!("diverged runs, excluded: {}", diverged.join(" ")));
    }
    write_file(path, &csv_bytes(path, &comments, &summarize(reports))?)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    read_csv(path)
}
