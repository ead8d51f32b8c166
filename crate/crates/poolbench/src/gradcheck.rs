//! Finite-difference verification of every pooling backward pass.

use std::fmt::Write as _;

use poolbench_core::gradcheck::{fd_check, sample_block_case, sample_case, FdConfig, FdOutcome, GradCase};
use poolbench_core::Method;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};

/// Per-method result. `worst_error` is infinite if an evaluation produced a
/// non-finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckRow {
    pub method: Method,
    pub checked: usize,
    pub skipped: usize,
    pub worst_error: f64,
    pub passed: bool,
}

fn method_rng(method: Method, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // one stream per method, so the cases don't depend on which methods are listed
    let index = Method::ALL.iter().position(|&m| m == method).unwrap_or(0);
    rng.set_stream(index as u64);
    rng
}

/// Checks `trials` random points per method: single windows for the
/// per-window methods (plus a tenth as many whole-block cases), whole blocks
/// for the SE methods. Points the sampler lands on a kink are skipped.
pub fn check_method(method: Method, trials: usize, tolerance: f64, seed: u64) -> Result<GradcheckRow> {
    let cfg = FdConfig { tolerance, ..FdConfig::default() };
    if !(tolerance > 0.0) {
        return Err(CliError::Usage("tolerance must be positive".into()));
    }
    let mut rng = method_rng(method, seed);
    let block_trials = if method.uses_se_branch() { 0 } else { (trials / 10).max(1) };
    let mut row = GradcheckRow { method, checked: 0, skipped: 0, worst_error: 0.0, passed: true };
    for i in 0..trials + block_trials {
        let GradCase { op, point } =
            if i < trials { sample_case(method, &mut rng)? } else { sample_block_case(method, &mut rng)? };
        match fd_check(op.as_ref(), &point, &cfg) {
            Ok(FdOutcome::Checked { max_rel_error, .. }) => {
                row.checked += 1;
                row.worst_error = row.worst_error.max(max_rel_error);
            }
            Ok(FdOutcome::NonDifferentiable) => row.skipped += 1,
            Err(poolbench_core::Error::NonFinite(_)) => {
                row.checked += 1;
                row.worst_error = f64::INFINITY;
            }
            Err(e) => return Err(e.into()),
        }
    }
    row.passed = row.worst_error < tolerance && row.checked > 0;
    Ok(row)
}

pub fn run_gradcheck(methods: &[Method], trials: usize, tolerance: f64, seed: u64) -> Result<Vec<GradcheckRow>> {
    methods.iter().map(|&m| check_method(m, trials, tolerance, seed)).collect()
}

pub fn format_table(rows: &[GradcheckRow], tolerance: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:>8} {:>8} {:>12}  status (tolerance {tolerance:e})",
        "method", "checked", "skipped", "worst"
    );
    for r in rows {
        let status = if r.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{:<6} {:>8} {:>8} {:>12.3e}  {status}",
            r.method.name(),
            r.checked,
            r.skipped,
            r.worst_error
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_ops_pass_tiny_tolerance_fails() {
        let rows = run_gradcheck(&[Method::Ap, Method::Nn], 50, 1e-5, 0).unwrap();
        assert!(rows.iter().all(|r| r.passed && r.worst_error < 1e-7), "{rows:?}");
        let rows = run_gradcheck(&[Method::Smp], 50, 1e-16, 0).unwrap();
        assert!(!rows[0].passed);
    }

    #[test]
    fn cases_do_not_depend_on_the_method_list() {
        let a = run_gradcheck(&[Method::Lnp], 20, 1e-5, 4).unwrap();
        let b = run_gradcheck(&[Method::Mp, Method::Lnp], 20, 1e-5, 4).unwrap();
        assert_eq!(a[0], b[1]);
    }
}
