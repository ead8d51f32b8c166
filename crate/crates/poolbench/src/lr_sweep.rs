//! Short runs over a list of learning rates, ranked by final train loss.

use std::fmt::Write as _;

use poolbench_core::data::generate;
use poolbench_core::Method;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::sweep::{run_jobs, worker_count};

pub const DEFAULT_EPOCHS: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LrRow {
    pub lr: f64,
    /// `None` if the run diverged.
    pub final_train_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LrSweep {
    pub method: Method,
    pub seed: u64,
    pub epochs: usize,
    /// In ascending order of learning rate.
    pub rows: Vec<LrRow>,
    pub best: Option<f64>,
}

/// Lowest final train loss wins; ties go to the smaller rate.
pub fn best_lr(rows: &[LrRow]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for r in rows {
        if let Some(loss) = r.final_train_loss {
            let better = match best {
                None => true,
                Some((bl, bloss)) => loss < bloss || (loss == bloss && r.lr < bl),
            };
            if better {
                best = Some((r.lr, loss));
            }
        }
    }
    best.map(|(lr, _)| lr)
}

/// Uses the single configured method (MP if none) and the first seed.
pub fn run_lr_sweep(cfg: &ExperimentConfig) -> Result<LrSweep> {
    cfg.validate()?;
    let method = match cfg.methods_or(&[Method::Mp])[..] {
        [m] => m,
        _ => return Err(CliError::Usage("lr-sweep takes exactly one method".into())),
    };
    let mut lrs = cfg.lr.clone().unwrap_or_else(|| vec![1e-3, 1e-4, 1e-5]);
    lrs.sort_by(f64::total_cmp);
    lrs.dedup();
    let seed = cfg.seeds[0];
    let jobs = lrs.iter().map(|&lr| Ok((method, cfg.optim(lr, DEFAULT_EPOCHS, seed)?))).collect::<Result<Vec<_>>>()?;
    let epochs = jobs[0].1.epochs;
    let data = generate(&cfg.dataset).map_err(|e| CliError::Usage(e.to_string()))?;
    let reports = run_jobs(&data, &jobs, cfg.lse_r, worker_count(jobs.len())?)?;
    let rows: Vec<LrRow> = lrs
        .iter()
        .zip(&reports)
        .map(|(&lr, r)| LrRow {
            lr,
            final_train_loss: if r.diverged() { None } else { r.final_metrics().map(|m| m.train_loss) },
        })
        .collect();
    let best = best_lr(&rows);
    Ok(LrSweep { method, seed, epochs, rows, best })
}

pub fn format_table(s: &LrSweep) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} seed {} epochs {}", s.method.name(), s.seed, s.epochs);
    let _ = writeln!(out, "{:>10} {:>14}", "lr", "train_loss");
    for r in &s.rows {
        match r.final_train_loss {
            Some(l) => {
                let _ = writeln!(out, "{:>10e} {:>14.6}", r.lr, l);
            }
            None => {
                let _ = writeln!(out, "{:>10e} {:>14}", r.lr, "diverged");
            }
        }
    }
    match s.best {
        Some(lr) => {
            let _ = writeln!(out, "best lr: {lr:e}");
        }
        None => out.push_str("best lr: none (all runs diverged)\n"),
    }
    out
}
