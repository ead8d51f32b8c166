//! Percentile tables of trained pooling parameters.
//!
//! Rows per (method, block, parameter): τ per channel for SMP and SMPF, the
//! exponent `p` for LNP, each once per seed and once pooled over all seeds.
//! Ordinal weights are echoed verbatim to `op_weights.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use poolbench_core::pool::ops::lnp_exponent;
use poolbench_core::stats::box_summary;
use poolbench_core::Method;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::report::{read_params_json, ParamsFile};

pub const REPORT_FILE: &str = "params_report.csv";
pub const OP_WEIGHTS_FILE: &str = "op_weights.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileRow {
    pub method: String,
    pub block: usize,
    pub param: String,
    /// A seed, or `all` for the pooled row.
    pub seed: String,
    pub count: usize,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalWeightRow {
    pub method: String,
    pub seed: u64,
    pub block: usize,
    /// 1-based; slot 1 weighs the window minimum, the last slot the maximum.
    pub slot: usize,
    pub weight: f64,
    pub initial: f64,
}

/// Outcome of the "maximum slot dominates in the block nearest the head" check.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceCheck {
    pub block: usize,
    pub seeds_dominant: usize,
    pub seeds_total: usize,
}

impl DominanceCheck {
    /// Holds in at least three quarters of the seeds.
    pub fn passed(&self) -> bool {
        self.seeds_total > 0 && 4 * self.seeds_dominant >= 3 * self.seeds_total
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamsReport {
    pub percentiles: Vec<PercentileRow>,
    pub ordinal: Vec<OrdinalWeightRow>,
    pub dominance: Option<DominanceCheck>,
}

/// Reported values of one snapshot, or `None` for parameters not tabulated.
fn reported(method: Method, name: &str, values: &[f64]) -> Option<(&'static str, Vec<f64>)> {
    match (method, name) {
        (Method::Smp | Method::SmpFixed, "tau") => Some(("tau", values.to_vec())),
        (Method::Lnp, "p_tilde") => Some(("p", values.iter().map(|&v| lnp_exponent(v)).collect())),
        _ => None,
    }
}

fn row(method: Method, block: usize, param: &str, seed: String, values: &[f64]) -> Option<PercentileRow> {
    let [p5, p25, p50, p75, p95] = box_summary(values)?;
    Some(PercentileRow {
        method: method.name().into(),
        block,
        param: param.into(),
        seed,
        count: values.len(),
        p5,
        p25,
        p50,
        p75,
        p95,
    })
}

/// (method, block, parameter) whose values are pooled over seeds.
type PoolKey = (Method, usize, &'static str);

/// `files` must already be filtered to the methods of interest; their order
/// does not matter.
pub fn build(files: &[ParamsFile]) -> Result<ParamsReport> {
    let mut sorted: Vec<(Method, &ParamsFile)> = files.iter().map(|f| Ok((f.method()?, f))).collect::<Result<_>>()?;
    sorted.sort_by_key(|(m, f)| (*m, f.seed));

    let mut report = ParamsReport::default();
    let mut pooled: Vec<(PoolKey, Vec<f64>)> = Vec::new();
    for &(method, file) in &sorted {
        for e in &file.entries {
            if let Some((param, values)) = reported(method, &e.name, &e.values) {
                report.percentiles.extend(row(method, e.block, param, file.seed.to_string(), &values));
                let key = (method, e.block, param);
                match pooled.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, v)) => v.extend(values),
                    None => pooled.push((key, values)),
                }
            }
            if method == Method::Op && e.name == "ordinal_w" {
                for (slot, (&weight, &initial)) in e.values.iter().zip(&e.initial).enumerate() {
                    report.ordinal.push(OrdinalWeightRow {
                        method: method.name().into(),
                        seed: file.seed,
                        block: e.block,
                        slot: slot + 1,
                        weight,
                        initial,
                    });
                }
            }
        }
    }
    pooled.sort_by_key(|((m, b, p), _)| (*m, *b, *p));
    for ((method, block, param), values) in pooled {
        report.percentiles.extend(row(method, block, param, "all".into(), &values));
    }
    report.dominance = dominance(&sorted);
    Ok(report)
}

fn dominance(files: &[(Method, &ParamsFile)]) -> Option<DominanceCheck> {
    let last_blocks: Vec<&[f64]> = files
        .iter()
        .filter(|(m, _)| *m == Method::Op)
        .filter_map(|(_, f)| {
            f.entries.iter().filter(|e| e.name == "ordinal_w").max_by_key(|e| e.block).map(|e| e.values.as_slice())
        })
        .collect();
    let block = files
        .iter()
        .filter(|(m, _)| *m == Method::Op)
        .flat_map(|(_, f)| f.entries.iter().filter(|e| e.name == "ordinal_w").map(|e| e.block))
        .max()?;
    let seeds_dominant = last_blocks
        .iter()
        .filter(|w| match w.split_last() {
            Some((top, rest)) => rest.iter().all(|v| top > v),
            None => false,
        })
        .count();
    Some(DominanceCheck { block, seeds_dominant, seeds_total: last_blocks.len() })
}

/// Loads every `params_*.json` in `dir` whose method is in `methods`.
pub fn load_dir(dir: &Path, methods: Option<&[Method]>) -> Result<Vec<ParamsFile>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("params_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    let mut files = Vec::new();
    for p in paths {
        let f = read_params_json(&p)?;
        if methods.is_none_or(|ms| f.method().is_ok_and(|m| ms.contains(&m))) {
            files.push(f);
        }
    }
    Ok(files)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::format(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::format(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write(dir: &Path, report: &ParamsReport) -> Result<()> {
    write_csv(&dir.join(REPORT_FILE), &report.percentiles)?;
    write_csv(&dir.join(OP_WEIGHTS_FILE), &report.ordinal)
}

pub fn format_table(report: &ParamsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:>5} {:<5} {:>4} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "method", "block", "param", "seed", "p5", "p25", "p50", "p75", "p95"
    );
    for r in &report.percentiles {
        let _ = writeln!(
            out,
            "{:<6} {:>5} {:<5} {:>4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            r.method, r.block, r.param, r.seed, r.p5, r.p25, r.p50, r.p75, r.p95
        );
    }
    let mut current = None;
    for w in &report.ordinal {
        if current != Some((w.seed, w.block)) {
            current = Some((w.seed, w.block));
            let _ = write!(out, "\nOP seed {} block {}:", w.seed, w.block);
        }
        let _ = write!(out, " w{}={:.6}", w.slot, w.weight);
    }
    if !report.ordinal.is_empty() {
        out.push('\n');
    }
    if let Some(d) = &report.dominance {
        let verdict = if d.passed() { "PASS" } else { "WARN" };
        let _ = writeln!(
            out,
            "{verdict}: max-slot weight strictly largest in OP block {} for {}/{} seeds",
            d.block, d.seeds_dominant, d.seeds_total
        );
    }
    out
}
