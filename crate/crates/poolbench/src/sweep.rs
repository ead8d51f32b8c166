//! Seeded (method, seed) sweeps on a small worker pool.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use poolbench_core::data::{generate, SyntheticDataset};
use poolbench_core::net::{ToyNet, ToyNetConfig};
use poolbench_core::train::{train, OptimConfig, RunReport};
use poolbench_core::Method;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::report;

pub const THREADS_VAR: &str = "POOLBENCH_THREADS";

/// Worker count: `POOLBENCH_THREADS` if set, else the available parallelism,
/// never more than `jobs`.
pub fn worker_count(jobs: usize) -> Result<usize> {
    let cap = match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => return Err(CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        },
        Err(_) => thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    Ok(cap.min(jobs).max(1))
}

pub fn net_for(method: Method, data: &SyntheticDataset, lse_r: f64) -> Result<ToyNet> {
    let config = ToyNetConfig { classes: data.config.classes, lse_r, ..ToyNetConfig::new(method) };
    Ok(ToyNet::new(config)?)
}

/// Trains every job; reports come back in job order. Results do not depend
/// on the thread count since each run owns its RNG.
pub fn run_jobs(
    data: &SyntheticDataset,
    jobs: &[(Method, OptimConfig)],
    lse_r: f64,
    threads: usize,
) -> Result<Vec<RunReport>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<RunReport>)>> = Mutex::new(Vec::with_capacity(jobs.len()));
    thread::scope(|s| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((method, optim)) = jobs.get(i) else { break };
                let outcome = net_for(*method, data, lse_r).and_then(|net| Ok(train(&net, data, optim)?));
                results.lock().unwrap_or_else(|e| e.into_inner()).push((i, outcome));
            });
        }
    });
    let mut results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}

/// One run per (method, seed), the same seed list for every method. Reports
/// are sorted by method, then seed.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    let data = generate(&cfg.dataset).map_err(|e| CliError::Usage(e.to_string()))?;
    let lr = cfg.single_lr()?;
    let mut jobs: Vec<(Method, OptimConfig)> = Vec::new();
    for method in cfg.methods_or(&Method::COMPARED) {
        for &seed in &cfg.seeds {
            if !jobs.iter().any(|(m, o)| *m == method && o.seed == seed) {
                jobs.push((method, cfg.optim(lr, 10, seed)?));
            }
        }
    }
    let mut reports = run_jobs(&data, &jobs, cfg.lse_r, worker_count(jobs.len())?)?;
    reports.sort_by_key(|r| (r.method, r.seed));
    Ok(reports)
}

/// Writes per-run files and `summary.csv` into `dir`, creating it if needed.
pub fn write_sweep(dir: &Path, reports: &[RunReport]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for r in reports {
        report::write_run(dir, r)?;
    }
    report::write_summary(&dir.join(report::SUMMARY_FILE), reports)
}
